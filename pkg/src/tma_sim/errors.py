"""Exception types shared by the simulator modules."""

from __future__ import annotations


class SimError(Exception):
    """Base class for all simulator errors."""


class InvalidInput(SimError):
    """Raised when quantization receives non-finite input."""


class ConfigError(SimError):
    """Raised for invalid problem or run configuration."""


class InvalidBlockM(ConfigError):
    """block_m must be a power of two >= 1."""


class InvalidBlockN(ConfigError):
    """block_n must be a multiple of 64."""


class OutOfMemory(SimError):
    """Arena capacity exhausted."""


class AlignmentError(SimError):
    """A transfer start address violates its arena's alignment rule."""

    def __init__(self, side: str, address: int, modulus: int):
        self.side = side
        self.address = address
        self.modulus = modulus
        super().__init__(
            f"{side} address {address} is not {modulus}-byte aligned "
            f"(remainder {address % modulus})"
        )


class BoundsError(SimError):
    """A transfer box does not fit inside a single allocation.

    Fatal by contract: the planning scheme is supposed to make this
    impossible, so any occurrence is a bug in the caller, not a
    recoverable condition.
    """

    def __init__(self, allocation_id, row: int, detail: str = ""):
        self.allocation_id = allocation_id
        self.row = row
        msg = f"box row {row} overflows allocation {allocation_id}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ResOutOfRange(SimError):
    """Residual row count outside [1, block_m]."""


class NoAlignedSolution(SimError):
    """No lead-in row count in [0, 15] aligns the scale transfer.

    Indicates a misaligned base allocation, which is a caller bug.
    """


class ShapeMismatch(SimError):
    """Outputs compared bitwise do not have the same shape."""


class DegenerateVariance(SimError):
    """A correlation variable has fewer than two distinct values."""
