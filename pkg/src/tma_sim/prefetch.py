"""Alignment-aware over-fetch planning for per-row scale tiles.

A row of scales is ``4 * ceil(K/128)`` bytes, which for most K is not
a multiple of 16, so the row where a tile starts is usually not a
legal global start address. Rather than pad the scale tensor, the
fetch window is widened to ``block_rows + 16`` rows and slid backwards
by the smallest ``row_prev`` in [0, 16) that lands the start address
on a 16-byte boundary. Only the central ``block_rows`` rows are
consumed; the rest is discarded over-fetch.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NoAlignedSolution
from .memory import GLOBAL_ALIGNMENT

GUARD_ROWS = 16


def scale_row_bytes(k: int) -> int:
    # f32 scale per 128-wide tile of the reduction axis
    return 4 * (-(-k // 128))


def window_rows(block_rows: int) -> int:
    return block_rows + GUARD_ROWS


@dataclass(frozen=True)
class PrefetchWindow:
    """A planned scale fetch: aligned start plus offsets of the valid rows."""

    start_addr: int
    row_prev: int
    row_next: int
    total_rows: int
    row_bytes: int

    @property
    def window_bytes(self) -> int:
        return self.total_rows * self.row_bytes

    @property
    def valid_row_offset(self) -> int:
        return self.row_prev


def plan_prefetch(tile_start_addr: int, row_bytes: int, block_rows: int) -> PrefetchWindow:
    """Slide a (block_rows+16)-row window back onto a 16-byte boundary.

    tile_start_addr is the byte address of the first scale row the tile
    actually needs. Raises NoAlignedSolution when no backward shift of
    at most 15 rows can align the window start.
    """
    if row_bytes <= 0:
        raise ValueError("row_bytes must be positive")
    for r in range(GUARD_ROWS):
        start = tile_start_addr - r * row_bytes
        if start % GLOBAL_ALIGNMENT == 0:
            return PrefetchWindow(
                start_addr=start,
                row_prev=r,
                row_next=window_rows(block_rows) - r,
                total_rows=window_rows(block_rows),
                row_bytes=row_bytes,
            )
    raise NoAlignedSolution(
        f"no row shift in [0, {GUARD_ROWS}) aligns address {tile_start_addr} "
        f"with row_bytes={row_bytes}"
    )


def extract_valid(window_buf, window: PrefetchWindow, valid_rows: int):
    """Valid scale rows from a fetched window buffer (trims the over-fetch)."""
    flat = window_buf.reshape(window.total_rows, window.row_bytes)
    return flat[window.row_prev : window.row_prev + valid_rows]
