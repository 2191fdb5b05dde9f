"""Descriptor pools and two-phase planning for residual row blocks.

Output tiles are ``block_rows`` tall, but a group whose row count is
not a multiple of ``block_rows`` leaves a residual block of ``res``
rows. Descriptors are immutable, so instead of one descriptor per
possible ``res`` we keep a small pool with power-of-two heights
``1, 2, 4, ..., block_rows`` and cover the residual with the largest
pool entry ``d = 2**floor(log2(res))`` issued twice:

* phase a: shared rows ``[0, d)``        -> global rows ``[rows-res, rows-res+d)``
* phase b: shared rows ``[res-d, res)``  -> global rows ``[rows-d, rows)``

The two boxes overlap by ``2*d - res`` rows; both copies carry the
same bytes there, so the double write is idempotent. When ``res`` is
itself a power of two the phases coincide and are still both issued
(branchless issue path).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidBlockM, ResOutOfRange
from .memory import TmaDescriptor, TmaEngine


def _floor_pow2(n: int) -> int:
    return 1 << (n.bit_length() - 1)


def pool_heights(block_rows: int) -> list[int]:
    """Box heights a pool holds: all powers of two up to block_rows."""
    if block_rows < 1 or block_rows & (block_rows - 1):
        raise InvalidBlockM(f"block_rows must be a power of two, got {block_rows}")
    return [1 << i for i in range(block_rows.bit_length())]


@dataclass(frozen=True)
class DescriptorPool:
    """Registered store descriptors keyed by box height."""

    block_rows: int
    entries: dict[int, TmaDescriptor]

    def __len__(self) -> int:
        return len(self.entries)

    def select(self, residual_rows: int) -> TmaDescriptor:
        """Largest pool entry not taller than ``residual_rows``."""
        if residual_rows < 1 or residual_rows > self.block_rows:
            raise ResOutOfRange(
                f"residual_rows {residual_rows} outside [1, {self.block_rows}]"
            )
        return self.entries[_floor_pow2(residual_rows)]


def build_pool(
    engine: TmaEngine,
    block_rows: int,
    box_cols: int,
    element_width: int,
    global_row_stride: int,
) -> DescriptorPool:
    """Register one descriptor per pool height; len = log2(block_rows)+1."""
    entries = {
        h: engine.register_descriptor(element_width, h, box_cols, global_row_stride)
        for h in pool_heights(block_rows)
    }
    return DescriptorPool(block_rows=block_rows, entries=entries)


@dataclass(frozen=True)
class StorePhase:
    smem_row: int
    gmem_row: int


@dataclass(frozen=True)
class TwoPhasePlan:
    """Placement of the two residual store boxes inside one group."""

    residual_rows: int
    desc_rows: int
    phase_a: StorePhase
    phase_b: StorePhase

    @property
    def overlap_rows(self) -> int:
        return 2 * self.desc_rows - self.residual_rows

    def covered_gmem_rows(self) -> range:
        return range(self.phase_a.gmem_row, self.phase_b.gmem_row + self.desc_rows)


def plan_two_phase(rows: int, block_rows: int) -> TwoPhasePlan | None:
    """Residual store plan for a group of ``rows`` rows, or None if res=0."""
    res = rows % block_rows
    if res == 0:
        return None
    d = _floor_pow2(res)
    return TwoPhasePlan(
        residual_rows=res,
        desc_rows=d,
        phase_a=StorePhase(smem_row=0, gmem_row=rows - res),
        phase_b=StorePhase(smem_row=res - d, gmem_row=rows - d),
    )


@dataclass(frozen=True)
class GroupStorePlan:
    group: int
    rows: int
    full_tiles: int
    residual: TwoPhasePlan | None


def plan_group_stores(group_sizes, block_rows: int) -> list[GroupStorePlan]:
    plans = []
    for g, rows in enumerate(group_sizes):
        rows = int(rows)
        plans.append(
            GroupStorePlan(
                group=g,
                rows=rows,
                full_tiles=rows // block_rows,
                residual=plan_two_phase(rows, block_rows),
            )
        )
    return plans


def format_plan(plans: list[GroupStorePlan]) -> str:
    """One line per group, e.g.

    group 0: full=1 res=125 desc=64 A:[0..63]->[128..191] B:[61..124]->[189..252]
    """
    lines = []
    for p in plans:
        if p.residual is None:
            lines.append(f"group {p.group}: full={p.full_tiles} res=0")
            continue
        r = p.residual
        d = r.desc_rows
        a, b = r.phase_a, r.phase_b
        lines.append(
            f"group {p.group}: full={p.full_tiles} res={r.residual_rows} desc={d} "
            f"A:[{a.smem_row}..{a.smem_row + d - 1}]->[{a.gmem_row}..{a.gmem_row + d - 1}] "
            f"B:[{b.smem_row}..{b.smem_row + d - 1}]->[{b.gmem_row}..{b.gmem_row + d - 1}]"
        )
    return "\n".join(lines)
