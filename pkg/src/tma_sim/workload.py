"""Random grouped workloads and the byte-traffic accounting around them.

Group sizes are drawn with a fixed recipe so every run is reproducible
from (seed, attempt): draw uniform ints in [0, 2*floor(M/G)], rescale
by M over their sum, floor, then push the rounding remainder into the
last group. The sum is exactly M by construction. An all-zero draw is
rejected and redrawn on the next seed substream.

Accounting compares the padding-free layout against a baseline that
rounds every group up to a full row block. Only per-row payloads
differ (quantized rows, their scales, output rows), so the relative
saving depends on M and the group count alone; the reduction width and
output width cancel. The sweep grid and the report CSV schema live
here too.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, InvalidInput
from .prefetch import scale_row_bytes

PAD_BLOCK_ROWS = 128


def generate_group_sizes(
    m_total: int, groups: int, seed: int, *, max_attempts: int = 64
) -> np.ndarray:
    """Split m_total rows into `groups` non-negative parts, summing exactly."""
    if groups < 1:
        raise InvalidInput(f"groups must be >= 1, got {groups}")
    if m_total < 0:
        raise InvalidInput(f"m_total must be >= 0, got {m_total}")
    if m_total == 0:
        return np.zeros(groups, dtype=np.int64)
    hi = 2 * (m_total // groups)
    if hi == 0:
        # fewer rows than groups: the draw range collapses, put all rows last
        sizes = np.zeros(groups, dtype=np.int64)
        sizes[-1] = m_total
        return sizes
    for attempt in range(max_attempts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, attempt))))
        v = rng.integers(0, hi, size=groups, endpoint=True).astype(np.int64)
        total = int(v.sum())
        if total == 0:
            continue
        alpha = m_total / total
        v = np.floor(alpha * v).astype(np.int64)
        v[-1] += m_total - int(v.sum())
        return v
    raise InvalidInput(f"no non-zero draw in {max_attempts} attempts (seed={seed})")


def pad_rows(group_sizes, block_rows: int = PAD_BLOCK_ROWS) -> int:
    """Rows the padded baseline adds: sum of per-group round-up slack."""
    total = 0
    for g in group_sizes:
        g = int(g)
        total += -(-g // block_rows) * block_rows - g
    return total


def row_payload_bytes(n: int, k: int) -> int:
    # one quantized input row + its scales + one output row
    return k + scale_row_bytes(k) + 2 * n


@dataclass(frozen=True)
class TrafficReport:
    m_total: int
    padded_rows: int
    bytes_actual: int
    bytes_padded: int
    saving_pct: float
    eliminated_traffic_bytes: int
    residual_store_ops: int


def account(
    group_sizes,
    n: int,
    k: int,
    block_rows: int = PAD_BLOCK_ROWS,
    block_cols: int = 128,
) -> TrafficReport:
    sizes = [int(g) for g in group_sizes]
    m_total = sum(sizes)
    padded = pad_rows(sizes, block_rows)
    per_row = row_payload_bytes(n, k)
    bytes_actual = m_total * per_row
    bytes_padded = (m_total + padded) * per_row
    saving = 0.0 if bytes_padded == 0 else 1.0 - bytes_actual / bytes_padded
    # padded rows are written at quantization time and read back by the
    # kernel, so each eliminated input byte counts twice
    eliminated = 2 * padded * (k + scale_row_bytes(k))
    n_tiles = -(-n // block_cols)
    residual_groups = sum(1 for g in sizes if g % block_rows != 0)
    return TrafficReport(
        m_total=m_total,
        padded_rows=padded,
        bytes_actual=bytes_actual,
        bytes_padded=bytes_padded,
        saving_pct=100.0 * saving,
        eliminated_traffic_bytes=eliminated,
        residual_store_ops=2 * n_tiles * residual_groups,
    )


REPORT_COLUMNS = (
    "M",
    "N",
    "K",
    "groups",
    "seed",
    "padded_rows",
    "bytes_padded",
    "bytes_actual",
    "saving_pct",
    "eliminated_traffic_bytes",
    "residual_store_ops",
    "bitwise_equal",
)


def write_report_csv(fileobj, rows: list[dict]) -> None:
    w = csv.DictWriter(fileobj, fieldnames=REPORT_COLUMNS)
    w.writeheader()
    for row in rows:
        w.writerow(row)


@dataclass(frozen=True)
class SweepCell:
    index: int
    m_total: int
    groups: int
    n: int
    k: int
    seed: int


GRID_M = (8192, 16384, 32768, 65536)
GRID_GROUPS = (4, 8, 16, 32)
GRID_N = (3072, 4096, 5120, 6144, 7168, 8192)
GRID_K = (3072, 4096, 5120, 6144, 7168, 8192)


def build_grid(
    base_seed: int,
    m_values=GRID_M,
    group_values=GRID_GROUPS,
    n_values=GRID_N,
    k_values=GRID_K,
) -> list[SweepCell]:
    """One cell per (M, groups, N, K); cell seed is base_seed + index."""
    cells = []
    idx = 0
    for m in m_values:
        for g in group_values:
            for n in n_values:
                for k in k_values:
                    cells.append(
                        SweepCell(
                            index=idx, m_total=m, groups=g, n=n, k=k, seed=base_seed + idx
                        )
                    )
                    idx += 1
    return cells


def accounting_row(cell: SweepCell, block_rows: int = PAD_BLOCK_ROWS, block_cols: int = 128):
    sizes = generate_group_sizes(cell.m_total, cell.groups, cell.seed)
    rep = account(sizes, cell.n, cell.k, block_rows, block_cols)
    return {
        "M": cell.m_total,
        "N": cell.n,
        "K": cell.k,
        "groups": cell.groups,
        "seed": cell.seed,
        "padded_rows": rep.padded_rows,
        "bytes_padded": rep.bytes_padded,
        "bytes_actual": rep.bytes_actual,
        "saving_pct": f"{rep.saving_pct:.6f}",
        "eliminated_traffic_bytes": rep.eliminated_traffic_bytes,
        "residual_store_ops": rep.residual_store_ops,
        "bitwise_equal": "na",
    }


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    if float(np.std(x)) == 0.0 or float(np.std(y)) == 0.0:
        raise DegenerateVariance("correlation undefined for a constant variable")
    return float(np.corrcoef(x, y)[0, 1])


def correlation_summary(rows: list[dict]) -> dict[str, float]:
    """Pearson correlation of the saving against each swept dimension."""
    saving = np.array([float(r["saving_pct"]) for r in rows], dtype=np.float64)
    out = {}
    for key, col in (("M", "M"), ("groups", "groups"), ("K", "K"), ("N", "N")):
        vals = np.array([float(r[col]) for r in rows], dtype=np.float64)
        out[key] = _corr(saving, vals)
    return out
