"""Command line front end.

Three subcommands share a small flag set (--config, --seed, --out,
--accounting-only):

* ``verify``  runs one grouped problem through both the padding-free
  path and the padded baseline and compares the outputs bit for bit.
* ``sweep``   walks a grid of (M, groups, N, K) cells, writes one
  report row per cell, and prints saving statistics plus correlations.
* ``golden``  replays the canonical residual case (one group of 253
  rows, 128-row blocks) and checks the planned store geometry against
  the known-good numbers.

Config files are plain ``key = value`` lines with ``#`` comments. The
environment variable TMA_SIM_LOG selects run verbosity: ``off`` (just
the summary), ``plans`` (adds the per-group store plan), or
``transfers`` (adds the full transfer log as CSV).

Exit codes: 0 success, 1 verification or simulation failure, 2 bad
usage or bad config.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .descriptors import format_plan
from .engine import (
    GroupedOperands,
    ProblemConfig,
    run_adaptive,
    run_padded_baseline,
    verify_bitwise,
)
from .errors import ConfigError, DegenerateVariance, InvalidInput, SimError
from .tensorio import write_tensor
from .workload import (
    account,
    accounting_row,
    build_grid,
    correlation_summary,
    generate_group_sizes,
    write_report_csv,
)

LOG_MODES = ("off", "plans", "transfers")

# refuse bitwise verification above this m*n*k volume; accounting-only
# still works at any size
ENGINE_VOLUME_LIMIT = 1 << 30

VERIFY_KEYS = {"n", "k", "m_total", "groups", "group_sizes", "block_m", "block_n", "seed"}
SWEEP_KEYS = {"grid_m", "grid_groups", "grid_n", "grid_k", "block_m", "block_n", "seed"}
GOLDEN_KEYS = {"seed"}


def log_mode() -> str:
    mode = os.environ.get("TMA_SIM_LOG", "off")
    if mode not in LOG_MODES:
        raise ConfigError(f"TMA_SIM_LOG must be one of {LOG_MODES}, got {mode!r}")
    return mode


def parse_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _check_keys(cfg: dict[str, str], allowed: set, path) -> None:
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")


def _as_int(cfg: dict[str, str], key: str, default: int) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as e:
        raise ConfigError(f"config key {key}={cfg[key]!r} is not an integer") from e


def _as_int_list(cfg: dict[str, str], key: str, default) -> tuple[int, ...]:
    if key not in cfg:
        return tuple(default)
    try:
        return tuple(int(x) for x in cfg[key].split(",") if x.strip())
    except ValueError as e:
        raise ConfigError(f"config key {key}={cfg[key]!r} is not a comma list of ints") from e


def random_operands(config: ProblemConfig, seed: int) -> GroupedOperands:
    """Deterministic dense operands with per-row magnitude spread, so the
    scale paths see genuinely different exponents."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0xA11CE))))
    m, k, n = config.m_total, config.k, config.n
    a = rng.standard_normal((m, k), dtype=np.float32)
    a *= np.exp2(rng.integers(-4, 5, size=(m, 1)).astype(np.float32))
    b = rng.standard_normal((k, n), dtype=np.float32)
    b *= np.exp2(rng.integers(-2, 3, size=(1, n)).astype(np.float32))
    return GroupedOperands.from_dense(a, b)


def golden_case(seed: int = 0) -> tuple[ProblemConfig, GroupedOperands]:
    """One group of 253 rows against 128-row blocks: 1 full tile plus a
    125-row residual covered by two 64-row phases overlapping 3 rows."""
    config = ProblemConfig(n=128, k=128, group_sizes=(253,))
    return config, random_operands(config, seed)


GOLDEN_PLAN = "group 0: full=1 res=125 desc=64 A:[0..63]->[128..191] B:[61..124]->[189..252]"


def _check_volume(config: ProblemConfig) -> None:
    volume = config.m_total * config.n * config.k
    if volume > ENGINE_VOLUME_LIMIT:
        raise ConfigError(
            f"m*n*k = {volume} exceeds the bitwise verification budget "
            f"({ENGINE_VOLUME_LIMIT}); rerun with --accounting-only"
        )


def _report_row(config: ProblemConfig, seed: int, rep, bitwise: str) -> dict:
    return {
        "M": config.m_total,
        "N": config.n,
        "K": config.k,
        "groups": config.groups,
        "seed": seed,
        "padded_rows": rep.padded_rows,
        "bytes_padded": rep.bytes_padded,
        "bytes_actual": rep.bytes_actual,
        "saving_pct": f"{rep.saving_pct:.6f}",
        "eliminated_traffic_bytes": rep.eliminated_traffic_bytes,
        "residual_store_ops": rep.residual_store_ops,
        "bitwise_equal": bitwise,
    }


def _write_manifest(out_dir: Path, command: str, params: dict, outputs: list) -> None:
    from . import __version__

    manifest = {
        "command": command,
        "parameters": params,
        "outputs": sorted(outputs),
        "versions": {"tma_sim": __version__, "numpy": np.__version__},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _emit_logs(run, out_dir: Path | None, outputs: list) -> None:
    mode = log_mode()
    if mode in ("plans", "transfers"):
        print(format_plan(run.plans))
    if mode == "transfers":
        if out_dir is not None:
            with open(out_dir / "transfers.csv", "w", newline="") as f:
                run.engine.log.write_csv(f)
            outputs.append("transfers.csv")
        else:
            buf = io.StringIO()
            run.engine.log.write_csv(buf)
            print(buf.getvalue(), end="")


def _run_one(config: ProblemConfig, seed: int, flip_bit: bool):
    operands = random_operands(config, seed)
    run = run_adaptive(config, operands)
    want = run_padded_baseline(config, operands)
    got = run.c_bits
    if flip_bit and got.size:
        got = got.copy()
        got[0, 0] ^= np.uint16(1)
    return run, verify_bitwise(got, want), got


def cmd_verify(args) -> int:
    cfg = parse_config_file(args.config) if args.config else {}
    if args.config:
        _check_keys(cfg, VERIFY_KEYS, args.config)
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", 0)
    n = _as_int(cfg, "n", 128)
    k = _as_int(cfg, "k", 256)
    block_m = _as_int(cfg, "block_m", 128)
    block_n = _as_int(cfg, "block_n", 128)
    if "group_sizes" in cfg:
        sizes = _as_int_list(cfg, "group_sizes", ())
    else:
        m_total = _as_int(cfg, "m_total", 600)
        groups = _as_int(cfg, "groups", 3)
        sizes = tuple(int(x) for x in generate_group_sizes(m_total, groups, seed))
    config = ProblemConfig(n=n, k=k, group_sizes=sizes, block_m=block_m, block_n=block_n)

    rep = account(config.group_sizes, n, k, block_m, block_n)
    print(
        f"problem: M={config.m_total} N={n} K={k} groups={config.groups} "
        f"block_m={block_m} block_n={block_n} seed={seed}"
    )
    print(
        f"traffic: actual={rep.bytes_actual} padded={rep.bytes_padded} "
        f"saving={rep.saving_pct:.2f}% padded_rows={rep.padded_rows} "
        f"residual_store_ops={rep.residual_store_ops}"
    )

    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list = []

    if args.accounting_only:
        if out_dir is not None:
            with open(out_dir / "report.csv", "w", newline="") as f:
                write_report_csv(f, [_report_row(config, seed, rep, "na")])
            outputs.append("report.csv")
            _write_manifest(out_dir, "verify", {"seed": seed, "accounting_only": True}, outputs)
            outputs.append("manifest.json")
        return 0

    _check_volume(config)
    run, bit_rep, got = _run_one(config, seed, args.flip_bit)
    _emit_logs(run, out_dir, outputs)
    if bit_rep.equal:
        print("bitwise: equal")
    else:
        print(f"bitwise: MISMATCH count={bit_rep.mismatches} first={bit_rep.first}")

    if out_dir is not None:
        with open(out_dir / "report.csv", "w", newline="") as f:
            write_report_csv(
                f, [_report_row(config, seed, rep, "1" if bit_rep.equal else "0")]
            )
        outputs.append("report.csv")
        write_tensor(out_dir / "c_adaptive.bin", got)
        outputs.append("c_adaptive.bin")
        _write_manifest(out_dir, "verify", {"seed": seed, "flip_bit": args.flip_bit}, outputs)
        outputs.append("manifest.json")
    return 0 if bit_rep.equal else 1


def cmd_sweep(args) -> int:
    cfg = parse_config_file(args.config) if args.config else {}
    if args.config:
        _check_keys(cfg, SWEEP_KEYS, args.config)
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", 0)
    block_m = _as_int(cfg, "block_m", 128)
    block_n = _as_int(cfg, "block_n", 128)
    cells = build_grid(
        seed,
        m_values=_as_int_list(cfg, "grid_m", (8192, 16384, 32768, 65536)),
        group_values=_as_int_list(cfg, "grid_groups", (4, 8, 16, 32)),
        n_values=_as_int_list(cfg, "grid_n", (3072, 4096, 5120, 6144, 7168, 8192)),
        k_values=_as_int_list(cfg, "grid_k", (3072, 4096, 5120, 6144, 7168, 8192)),
    )

    rows = []
    failures = 0
    for cell in cells:
        row = accounting_row(cell, block_m, block_n)
        if not args.accounting_only:
            sizes = tuple(
                int(x) for x in generate_group_sizes(cell.m_total, cell.groups, cell.seed)
            )
            config = ProblemConfig(
                n=cell.n, k=cell.k, group_sizes=sizes, block_m=block_m, block_n=block_n
            )
            _check_volume(config)
            _, bit_rep, _ = _run_one(config, cell.seed, False)
            row["bitwise_equal"] = "1" if bit_rep.equal else "0"
            failures += 0 if bit_rep.equal else 1
        rows.append(row)

    out_dir = Path(args.out) if args.out else None
    outputs: list = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.csv", "w", newline="") as f:
            write_report_csv(f, rows)
        outputs.append("report.csv")
        _write_manifest(
            out_dir, "sweep", {"seed": seed, "cells": len(cells)}, outputs
        )
        outputs.append("manifest.json")
    else:
        write_report_csv(sys.stdout, rows)

    savings = np.array([float(r["saving_pct"]) for r in rows])
    print(
        f"sweep: cells={len(cells)} saving_mean={savings.mean():.2f}% "
        f"saving_max={savings.max():.2f}%"
    )
    try:
        corr = correlation_summary(rows)
        print(
            "correlation(saving, .): "
            + " ".join(f"{k}={v:+.4f}" for k, v in corr.items())
        )
    except DegenerateVariance:
        pass
    if failures:
        print(f"sweep: {failures} of {len(cells)} cells FAILED bitwise check")
    return 1 if failures else 0


def cmd_golden(args) -> int:
    cfg = parse_config_file(args.config) if args.config else {}
    if args.config:
        _check_keys(cfg, GOLDEN_KEYS, args.config)
    seed = args.seed if args.seed is not None else _as_int(cfg, "seed", 0)
    config, operands = golden_case(seed)

    rep = account(config.group_sizes, config.n, config.k, config.block_m, config.block_n)
    run = run_adaptive(config, operands)
    want = run_padded_baseline(config, operands)
    bit_rep = verify_bitwise(run.c_bits, want)

    plan_text = format_plan(run.plans)
    print(plan_text)
    checks = []
    checks.append(("plan geometry", plan_text == GOLDEN_PLAN))
    residual = run.plans[0].residual
    checks.append(("overlap rows = 3", residual is not None and residual.overlap_rows == 3))
    res_ops = sum(
        1
        for r in run.engine.log.records
        if r.direction == "s2g" and r.rows == 64
    )
    checks.append(("residual store ops = 2", res_ops == 2))
    checks.append(("bitwise equal", bit_rep.equal))
    ok = True
    for name, passed in checks:
        print(f"golden: {name}: {'ok' if passed else 'FAIL'}")
        ok = ok and passed

    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs: list = []
        with open(out_dir / "report.csv", "w", newline="") as f:
            write_report_csv(f, [_report_row(config, seed, rep, "1" if bit_rep.equal else "0")])
        outputs.append("report.csv")
        write_tensor(out_dir / "c_adaptive.bin", run.c_bits)
        outputs.append("c_adaptive.bin")
        _write_manifest(out_dir, "golden", {"seed": seed}, outputs)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tma-sim",
        description="Simulator for padding-free grouped GEMM data movement",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("verify", cmd_verify), ("sweep", cmd_sweep), ("golden", cmd_golden)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed (u64)")
        p.add_argument("--out", help="directory for report.csv and tensors")
        p.add_argument(
            "--accounting-only",
            action="store_true",
            help="skip the simulated run, only compute byte accounting",
        )
        p.add_argument("--flip-bit", action="store_true", help=argparse.SUPPRESS)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        log_mode()
        return args.func(args)
    except (ConfigError, InvalidInput) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SimError as e:
        print(f"simulation failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
