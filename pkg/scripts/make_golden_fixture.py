#!/usr/bin/env python3
"""Regenerate the committed golden fixture.

The fixture pins the canonical residual-store case (one group of 253
rows, 128x128x128 problem) as binary tensors: quantized operands, their
scales, and the expected bfloat16 output bits. Tests replay the engine
from the operand files and require byte equality with c_golden.bin, so
the fixture guards against silent changes to the compute or store
paths. Rerun this script only when the pinned semantics intentionally
change, and commit the result.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from tma_sim.cli import golden_case
from tma_sim.engine import run_adaptive, run_padded_baseline, verify_bitwise
from tma_sim.tensorio import write_tensor

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "fixtures" / "residual253"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    config, operands = golden_case(args.seed)
    run = run_adaptive(config, operands)
    want = run_padded_baseline(config, operands)
    rep = verify_bitwise(run.c_bits, want)
    if not rep.equal:
        raise SystemExit(f"refusing to write fixture: {rep.mismatches} bitwise mismatches")

    args.out.mkdir(parents=True, exist_ok=True)
    write_tensor(args.out / "a_codes.bin", operands.a_codes.codes)
    write_tensor(args.out / "a_scales.bin", operands.a_scales)
    write_tensor(args.out / "b_codes.bin", operands.b_codes.codes)
    write_tensor(args.out / "b_scales.bin", operands.b_scales)
    write_tensor(args.out / "c_golden.bin", run.c_bits)
    (args.out / "config.txt").write_text(
        "# canonical residual-store case: one group of 253 rows\n"
        f"n = {config.n}\n"
        f"k = {config.k}\n"
        "group_sizes = 253\n"
        f"seed = {args.seed}\n"
    )
    print(f"wrote fixture to {args.out} (M=253, saving case: 1 full tile + 125-row residual)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
