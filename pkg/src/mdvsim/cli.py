"""Command-line front end: single runs, comparison matrices, validation.

Stats go out as versioned CSV rows so downstream plotting can rely on a
stable schema.  Exit codes: 0 ok, 1 validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .config import MachineConfig, parse_config_text
from .harness import RunResult, run_kernel
from .kernels import KERNELS
from .timing import SCHEMES

SCHEMA_VERSION = "mdvsim-1"

CSV_COLUMNS = [
    "schema",
    "kernel",
    "isa",
    "scheme",
    "seed",
    "cycles_total",
    "cycles_idle",
    "cycles_compute",
    "cycles_mem",
    "vinsts_config",
    "vinsts_memory",
    "vinsts_move",
    "vinsts_arith",
    "vinsts_total",
    "sinsts",
    "bytes_moved",
    "utilization",
    "cycles_ratio",
    "vinst_ratio",
    "util_delta",
]

PARAM_FLAGS = {
    "m": int, "n": int, "k": int, "nr": int, "mc": int,
    "rows": int, "cols": int, "density": float,
}

DEFAULT_KERNELS = ["transpose", "reduction", "upsample", "gemm", "spmm"]


def _row(result: RunResult, baseline: RunResult | None = None) -> dict:
    s = result.stats
    row = {
        "schema": SCHEMA_VERSION,
        "kernel": result.kernel,
        "isa": result.isa,
        "scheme": result.scheme,
        "seed": result.seed,
        "cycles_total": s.makespan,
        "cycles_idle": s.cycles_idle,
        "cycles_compute": s.cycles_compute,
        "cycles_mem": s.cycles_mem,
        "vinsts_config": s.vinsts["config"],
        "vinsts_memory": s.vinsts["memory"],
        "vinsts_move": s.vinsts["move"],
        "vinsts_arith": s.vinsts["arith"],
        "vinsts_total": s.vinsts_total,
        "sinsts": s.sinsts,
        "bytes_moved": s.bytes_moved,
        "utilization": f"{s.utilization:.6f}",
        "cycles_ratio": "",
        "vinst_ratio": "",
        "util_delta": "",
    }
    if baseline is not None:
        base = baseline.stats
        if base.makespan:
            row["cycles_ratio"] = f"{s.makespan / base.makespan:.6f}"
        if base.vinsts_total:
            row["vinst_ratio"] = f"{s.vinsts_total / base.vinsts_total:.6f}"
        row["util_delta"] = f"{s.utilization - base.utilization:.6f}"
    return row


def _write_csv(rows: list[dict], out_path: str | None):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    text = buf.getvalue()
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _machine(args) -> MachineConfig | None:
    cfg = MachineConfig()
    if args.config:
        cfg = parse_config_text(Path(args.config).read_text(), cfg)
    if args.set:
        entries = {}
        for item in args.set:
            if "=" not in item:
                raise SystemExit(2)
            key, value = item.split("=", 1)
            entries[key.strip()] = value.strip()
        from .config import apply_overrides

        cfg = apply_overrides(cfg, entries)
    return cfg


def _params(args, kernel: str | None = None) -> dict:
    given = {name: getattr(args, name) for name in PARAM_FLAGS
             if getattr(args, name) is not None}
    if kernel in KERNELS:
        given = {k: v for k, v in given.items() if k in KERNELS[kernel].defaults}
    return given


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="machine config file (key=value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VAL",
                   help="override one config key (repeatable)")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    for name, typ in PARAM_FLAGS.items():
        p.add_argument(f"--{name}", type=typ, default=None)


def cmd_simulate(args) -> int:
    machine = _machine(args)
    params = _params(args)
    rows = []
    try:
        base = None
        for isa in args.isa.split(","):
            result = run_kernel(args.kernel, isa=isa, scheme=args.scheme,
                                seed=args.seed, machine=machine, **params)
            if not result.ok:
                sys.stderr.write(
                    f"validation failed for {args.kernel}/{isa}/{args.scheme}: "
                    f"{result.mismatches[0]}\n"
                )
                return 1
            rows.append(_row(result, base if isa != "mve" else None))
            if isa == "mve":
                base = result
    except Exception as exc:  # unknown kernel, bad sizes, bad config
        sys.stderr.write(f"error: {exc}\n")
        return 2
    _write_csv(rows, args.out)
    return 0


def cmd_compare(args) -> int:
    machine = _machine(args)
    kernels = list(DEFAULT_KERNELS) if args.kernels is None else [
        k for k in args.kernels.split(",") if k
    ]
    isas = args.isas.split(",")
    schemes = args.schemes.split(",")
    rows = []
    failures = 0
    for kernel in kernels:
        for scheme in schemes:
            base = None
            for isa in isas:
                try:
                    result = run_kernel(kernel, isa=isa, scheme=scheme,
                                        seed=args.seed, machine=machine,
                                        **_params(args, kernel))
                except Exception as exc:
                    sys.stderr.write(f"error: {kernel}/{isa}/{scheme}: {exc}\n")
                    failures += 1
                    continue
                if not result.ok:
                    sys.stderr.write(
                        f"mismatch: {kernel}/{isa}/{scheme}: {result.mismatches[0]}\n"
                    )
                    failures += 1
                rows.append(_row(result, base))
                if isa == "mve":
                    base = result
    _write_csv(rows, args.out)
    return 1 if failures else 0


def cmd_validate(args) -> int:
    machine = _machine(args)
    if args.kernels is None:
        kernels = list(DEFAULT_KERNELS) + ["gemm_f32"]
    else:
        kernels = [k for k in args.kernels.split(",") if k]
    isas = args.isas.split(",")
    schemes = args.schemes.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    failures = 0
    total = 0
    for kernel in kernels:
        for isa in isas:
            for scheme in schemes:
                for seed in seeds:
                    total += 1
                    try:
                        result = run_kernel(kernel, isa=isa, scheme=scheme,
                                            seed=seed, machine=machine,
                                            **_params(args, kernel))
                    except Exception as exc:
                        print(f"FAIL {kernel}/{isa}/{scheme}/seed{seed}: {exc}")
                        failures += 1
                        continue
                    if result.ok:
                        print(f"ok   {kernel}/{isa}/{scheme}/seed{seed}")
                    else:
                        print(f"FAIL {kernel}/{isa}/{scheme}/seed{seed}: "
                              f"{result.mismatches[0]}")
                        failures += 1
    print(f"{total - failures}/{total} passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdvsim",
        description="multi-dimensional long-vector in-cache engine simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one kernel and emit stats")
    p_sim.add_argument("--kernel", required=True, choices=sorted(KERNELS))
    p_sim.add_argument("--isa", default="mve",
                       help="comma list of mve,rvv1d (mve first gives ratios)")
    p_sim.add_argument("--scheme", default="bs", choices=SCHEMES)
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="kernel x isa x scheme matrix")
    p_cmp.add_argument("--kernels", default=None,
                       help=f"comma list (default {','.join(DEFAULT_KERNELS)})")
    p_cmp.add_argument("--isas", default="mve,rvv1d")
    p_cmp.add_argument("--schemes", default="bs")
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="check kernels against scalar goldens")
    p_val.add_argument("--kernels", default=None)
    p_val.add_argument("--isas", default="mve,rvv1d")
    p_val.add_argument("--schemes", default="bs,bp,bh,ac")
    p_val.add_argument("--seeds", default="0,1,2")
    _add_common(p_val)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
