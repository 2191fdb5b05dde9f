"""Scale over-fetch window planning."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tma_sim.errors import NoAlignedSolution
from tma_sim.prefetch import (
    GUARD_ROWS,
    extract_valid,
    plan_prefetch,
    scale_row_bytes,
    window_rows,
)


def test_scale_row_bytes():
    assert scale_row_bytes(7168) == 224
    assert scale_row_bytes(640) == 20
    assert scale_row_bytes(128) == 4
    assert scale_row_bytes(129) == 8


def test_aligned_rows_need_no_shift():
    # 224-byte rows are 16-byte multiples, any row index starts aligned
    for row in (0, 1, 77):
        win = plan_prefetch(row * 224, 224, 128)
        assert win.row_prev == 0
        assert win.start_addr == row * 224


def test_narrow_rows_shift_back():
    # 20-byte rows: from 3 rows in (byte 60), shifting back 3 rows hits 0
    win = plan_prefetch(60, 20, 128)
    assert win.row_prev == 3
    assert win.start_addr == 0
    assert win.row_next == window_rows(128) - 3


def test_window_size_is_block_plus_guard():
    win = plan_prefetch(0, 224, 128)
    assert win.total_rows == 144
    assert win.window_bytes == 144 * 224 == 32256


def test_no_aligned_solution():
    # from byte 2 with 4-byte rows the start cycles {2, 14, 10, 6} mod 16
    with pytest.raises(NoAlignedSolution):
        plan_prefetch(2, 4, 128)
    with pytest.raises(ValueError):
        plan_prefetch(0, 0, 128)


@given(
    kb=st.integers(1, 64),
    tile_row=st.integers(0, 1 << 20),
    block_log=st.integers(4, 8),
)
@settings(max_examples=400, deadline=None)
def test_solution_always_exists_from_aligned_base(kb, tile_row, block_log):
    # a 16-aligned tensor base guarantees a shift of at most 15 rows
    row_bytes = 4 * kb
    block = 1 << block_log
    addr = tile_row * row_bytes
    win = plan_prefetch(addr, row_bytes, block)
    assert win.start_addr % 16 == 0
    assert 0 <= win.row_prev < GUARD_ROWS
    assert win.start_addr == addr - win.row_prev * row_bytes
    assert win.row_prev + win.row_next == win.total_rows == block + GUARD_ROWS
    # the window covers the block rows the tile needs
    first_needed = addr
    last_needed = addr + block * row_bytes
    assert win.start_addr <= first_needed
    assert win.start_addr + win.window_bytes >= last_needed


def test_extract_valid_returns_central_rows():
    win = plan_prefetch(60, 20, 4)  # row_prev=3, total 20 rows
    buf = np.arange(win.window_bytes, dtype=np.uint8)
    got = extract_valid(buf, win, 4)
    want = buf.reshape(win.total_rows, 20)[3:7]
    assert np.array_equal(got, want)
