"""Byte-addressable simulated memory with an alignment-checked bulk-copy engine.

Two arena kinds exist: ``global`` (allocations 16-byte aligned) and
``shared`` (128-byte aligned). Bulk copies move a fixed 2-D box
described by an immutable descriptor between the two arenas and are
validated on every call:

* the global start address must be 0 mod 16,
* the shared start offset must be 0 mod 128,
* the full box must lie inside a single allocation on each side.

Transfers execute synchronously and are recorded in an append-only log
so byte traffic can be audited after a run. Descriptors must be
registered before the first copy, mirroring hardware descriptors that
are configured once at host initialization and immutable afterwards.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, BoundsError, OutOfMemory

GLOBAL_ALIGNMENT = 16
SHARED_ALIGNMENT = 128

_ARENA_ALIGNMENT = {"global": GLOBAL_ALIGNMENT, "shared": SHARED_ALIGNMENT}

GMEM_TO_SMEM = "g2s"
SMEM_TO_GMEM = "s2g"


@dataclass(frozen=True)
class Allocation:
    id: int
    base: int
    length: int
    alignment: int

    @property
    def end(self) -> int:
        return self.base + self.length

    def contains(self, addr: int, nbytes: int) -> bool:
        return self.base <= addr and addr + nbytes <= self.end


class SimArena:
    """Flat byte-addressable memory of one kind, starting at address 0."""

    def __init__(self, kind: str, capacity: int):
        if kind not in _ARENA_ALIGNMENT:
            raise ValueError(f"unknown arena kind {kind!r}")
        self.kind = kind
        self.buf = np.zeros(capacity, dtype=np.uint8)
        self.allocations: list[Allocation] = []
        self._cursor = 0

    @property
    def required_alignment(self) -> int:
        return _ARENA_ALIGNMENT[self.kind]

    @property
    def capacity(self) -> int:
        return len(self.buf)

    def alloc(self, length: int, alignment: int | None = None) -> int:
        """Reserve ``length`` bytes; returns the (aligned) base address."""
        if alignment is None:
            alignment = self.required_alignment
        if alignment != self.required_alignment:
            raise ValueError(
                f"{self.kind} arena requires {self.required_alignment}-byte "
                f"alignment, got {alignment}"
            )
        if length < 0:
            raise ValueError("length must be non-negative")
        base = -(-self._cursor // alignment) * alignment
        if base + length > self.capacity:
            raise OutOfMemory(
                f"{self.kind} arena: need {base + length} bytes, have {self.capacity}"
            )
        a = Allocation(len(self.allocations), base, length, alignment)
        self.allocations.append(a)
        self._cursor = base + length
        return base

    def allocation_at(self, addr: int) -> Allocation | None:
        for a in self.allocations:
            if a.base <= addr < a.end:
                return a
        return None

    # Host-side access (operand placement, result readout); not logged.
    def view(self, addr: int, nbytes: int) -> np.ndarray:
        if addr < 0 or addr + nbytes > self.capacity:
            raise BoundsError(None, 0, f"host view [{addr}, {addr + nbytes}) outside arena")
        return self.buf[addr : addr + nbytes]

    def write(self, addr: int, data) -> None:
        raw = np.ascontiguousarray(data).view(np.uint8).reshape(-1)
        self.view(addr, raw.size)[:] = raw


@dataclass(frozen=True)
class TmaDescriptor:
    """Immutable 2-D bulk-copy template.

    ``box_rows`` x ``box_cols`` elements of ``element_width`` bytes; on
    the global side consecutive rows are ``global_row_stride`` bytes
    apart, on the shared side the box is packed contiguously.
    """

    id: int
    element_width: int
    box_rows: int
    box_cols: int
    global_row_stride: int

    def __post_init__(self):
        if self.box_rows < 1 or self.box_cols * self.element_width <= 0:
            raise ValueError("descriptor box must be non-empty")

    @property
    def row_bytes(self) -> int:
        return self.box_cols * self.element_width

    @property
    def box_bytes(self) -> int:
        return self.box_rows * self.row_bytes


@dataclass(frozen=True)
class TransferOp:
    """One requested copy: a descriptor applied at concrete addresses."""

    direction: str  # GMEM_TO_SMEM or SMEM_TO_GMEM
    gmem_base: int
    smem_offset: int


@dataclass(frozen=True)
class TransferRecord:
    seq: int
    direction: str
    desc_id: int
    gmem_base: int
    smem_offset: int
    rows: int
    cols: int
    bytes: int


CSV_COLUMNS = ("seq", "direction", "desc_id", "gmem_base", "smem_offset", "rows", "cols", "bytes")


@dataclass
class TransferLog:
    records: list[TransferRecord] = field(default_factory=list)

    def append(self, rec: TransferRecord) -> None:
        self.records.append(rec)

    def summary(self) -> tuple[int, int, int]:
        """(bytes gmem->smem, bytes smem->gmem, op count)."""
        g2s = sum(r.bytes for r in self.records if r.direction == GMEM_TO_SMEM)
        s2g = sum(r.bytes for r in self.records if r.direction == SMEM_TO_GMEM)
        return g2s, s2g, len(self.records)

    def write_csv(self, fileobj) -> None:
        w = csv.writer(fileobj)
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([getattr(r, col) for col in CSV_COLUMNS])


class TmaEngine:
    """One global/shared arena pair plus descriptor registry and log.

    Single-threaded by design; create independent engines for
    concurrent simulations.
    """

    def __init__(self, gmem_capacity: int, smem_capacity: int):
        self.gmem = SimArena("global", gmem_capacity)
        self.smem = SimArena("shared", smem_capacity)
        self.log = TransferLog()
        self._descriptors: dict[int, TmaDescriptor] = {}

    def register_descriptor(
        self, element_width: int, box_rows: int, box_cols: int, global_row_stride: int
    ) -> TmaDescriptor:
        """Create a descriptor; only allowed before the first transfer."""
        if self.log.records:
            raise RuntimeError("descriptors are static: registration after first transfer")
        desc = TmaDescriptor(
            id=len(self._descriptors),
            element_width=element_width,
            box_rows=box_rows,
            box_cols=box_cols,
            global_row_stride=global_row_stride,
        )
        self._descriptors[desc.id] = desc
        return desc

    def descriptor(self, desc_id: int) -> TmaDescriptor:
        return self._descriptors[desc_id]

    def _check_box(self, desc: TmaDescriptor, op: TransferOp) -> tuple[Allocation, Allocation]:
        if op.gmem_base % GLOBAL_ALIGNMENT != 0:
            raise AlignmentError("global", op.gmem_base, GLOBAL_ALIGNMENT)
        if op.smem_offset % SHARED_ALIGNMENT != 0:
            raise AlignmentError("shared", op.smem_offset, SHARED_ALIGNMENT)

        galloc = self.gmem.allocation_at(op.gmem_base)
        if galloc is None:
            raise BoundsError(None, 0, f"global address {op.gmem_base} not in any allocation")
        for r in range(desc.box_rows):
            start = op.gmem_base + r * desc.global_row_stride
            if not galloc.contains(start, desc.row_bytes):
                raise BoundsError(galloc.id, r, "global side")

        salloc = self.smem.allocation_at(op.smem_offset)
        if salloc is None:
            raise BoundsError(None, 0, f"shared offset {op.smem_offset} not in any allocation")
        if not salloc.contains(op.smem_offset, desc.box_bytes):
            over = (salloc.end - op.smem_offset) // desc.row_bytes
            raise BoundsError(salloc.id, over, "shared side")
        return galloc, salloc

    def tma_copy(self, desc: TmaDescriptor, op: TransferOp) -> None:
        """Move the descriptor's full box; alignment checked on every call."""
        if self._descriptors.get(desc.id) is not desc:
            raise ValueError("descriptor is not registered with this engine")
        self._check_box(desc, op)

        rb = desc.row_bytes
        gview = np.lib.stride_tricks.as_strided(
            self.gmem.buf[op.gmem_base :],
            shape=(desc.box_rows, rb),
            strides=(desc.global_row_stride, 1),
        )
        sview = self.smem.buf[op.smem_offset : op.smem_offset + desc.box_bytes]
        sview = sview.reshape(desc.box_rows, rb)
        if op.direction == GMEM_TO_SMEM:
            sview[:] = gview
        elif op.direction == SMEM_TO_GMEM:
            gview[:] = sview
        else:
            raise ValueError(f"unknown direction {op.direction!r}")

        self.log.append(
            TransferRecord(
                seq=len(self.log.records),
                direction=op.direction,
                desc_id=desc.id,
                gmem_base=op.gmem_base,
                smem_offset=op.smem_offset,
                rows=desc.box_rows,
                cols=desc.box_cols,
                bytes=desc.box_bytes,
            )
        )

    def transfer_log_summary(self) -> tuple[int, int, int]:
        return self.log.summary()
