"""Command-line entry points.

Verbs:

* ``run``: execute one configured (workload, mode) cell, or, with no
  config file, the full default study matrix (every workload under every
  baseline mode).  One report file per cell.
* ``sweep``: cartesian sweep over config axes given as
  ``--axis key=v1,v2,...``; points execute in lexicographic order, one
  report per point, optionally across parallel worker processes.
* ``report``: aggregate report files into a normalized-speedup summary
  with per-phase breakdown columns.
* ``attack``: fault-injection mode; runs a tamper/replay suite against the
  byte-accurate encrypted store wired to a live TEE.
* ``validate-config``: parse and validate a config file.

Exit codes: 0 success, 2 config error, 3 integrity violation detected
(``--expect-violation`` turns a fully-detected attack run into 0).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import (
    MODES, ConfigError, RunConfig, config_text, load_config, parse_config,
)
from .engine import run_single
from .report import parse_report, render_report, summarize
from .workloads import WORKLOADS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg.validate()


def _out_dir(args) -> Path:
    out = Path(args.out or "reports")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cell_name(cfg: RunConfig, extra: str = "") -> str:
    tag = f"{cfg.workload}_{cfg.mode}_s{cfg.seed}"
    return f"{tag}{extra}.report"


def _execute_cell(cfg: RunConfig) -> str:
    return render_report(run_single(cfg))


def _write_reports(cells: list[tuple[str, RunConfig]], parallel: int) -> list[tuple[str, str]]:
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            texts = list(pool.map(_execute_cell, [c for _, c in cells]))
    else:
        texts = [_execute_cell(c) for _, c in cells]
    return [(name, text) for (name, _), text in zip(cells, texts)]


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    cells: list[tuple[str, RunConfig]] = []
    if args.config:
        cells.append((_cell_name(cfg), cfg))
    else:
        # Default study matrix: every workload under every mode.
        for wl in sorted(WORKLOADS):
            for mode in MODES:
                cell = replace(cfg, workload=wl, mode=mode)
                cells.append((_cell_name(cell), cell))
    for name, text in _write_reports(cells, args.parallel):
        (out / name).write_text(text)
        print(f"wrote {out / name}")
    return EXIT_OK


_AXIS_KEYS = {
    "channels": int, "t_rd_ns": int, "t_wr_ns": int, "dataset_mib": int,
    "mode": str, "workload": str, "counter_scheme": str,
    "mapping_placement": str, "isc_cpu_freq_ghz": float,
    "isc_cpu_model": str, "seed": int, "dram_size": int,
}


def _parse_axes(pairs: list[str]) -> list[tuple[str, list]]:
    axes = []
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--axis needs key=v1,v2 (got {pair!r})")
        key, _, values = pair.partition("=")
        if key not in _AXIS_KEYS:
            raise ConfigError(f"unknown sweep axis {key!r}")
        cast = _AXIS_KEYS[key]
        axes.append((key, [cast(v) for v in values.split(",") if v]))
    return sorted(axes)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    axes = _parse_axes(args.axis or [])
    if not axes:
        raise ConfigError("sweep needs at least one --axis")
    out = _out_dir(args)
    points: list[dict] = [{}]
    for key, values in axes:   # lexicographic order over sorted axes
        points = [dict(p, **{key: v}) for p in points for v in sorted(values, key=str)]
    cells = []
    for point in points:
        cell = replace(cfg, **point).validate()
        extra = "".join(f"_{k}{v}" for k, v in sorted(point.items()))
        cells.append((_cell_name(cell, extra), cell))
    for name, text in _write_reports(cells, args.parallel):
        (out / name).write_text(text)
        print(f"wrote {out / name}")
    return EXIT_OK


def cmd_report(args) -> int:
    records = [parse_report(Path(f).read_text()) for f in args.files]
    table = summarize(records, baseline_mode=args.baseline)
    if args.out:
        Path(args.out).write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.config:
        raise ConfigError("validate-config requires --config")
    cfg = load_config(args.config)
    print(config_text(cfg), end="")
    return EXIT_OK


def cmd_attack(args) -> int:
    from .attacks import run_attack_suite
    cfg = _load(args)
    outcome = run_attack_suite(cfg)
    out = _out_dir(args)
    path = out / f"attack_s{cfg.seed}.report"
    path.write_text(outcome.render())
    print(f"wrote {path}")
    print(f"injected={outcome.injected} detected={outcome.detected} "
          f"false_negatives={outcome.missed} "
          f"abort={outcome.abort_reason or 'none'}")
    if outcome.missed:
        print("attack suite missed injections", file=sys.stderr)
        return 1
    if outcome.detected:
        return EXIT_OK if args.expect_violation else EXIT_VIOLATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="securessd",
        description="Deterministic computational-SSD TEE simulator")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="config file (INI key/value)")
        p.add_argument("--seed", type=int, help="override [sim] seed")
        p.add_argument("--out", help="output directory (default ./reports)")
        p.add_argument("--parallel", type=int, default=1,
                       help="worker processes for independent cells")

    p_run = sub.add_parser("run", help="run one cell or the default matrix")
    common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep config axes")
    common(p_sweep)
    p_sweep.add_argument("--axis", action="append",
                         help="axis as key=v1,v2,... (repeatable)")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_rep = sub.add_parser("report", help="summarize report files")
    p_rep.add_argument("files", nargs="+")
    p_rep.add_argument("--baseline", default="HOST", choices=list(MODES))
    p_rep.add_argument("--out")
    p_rep.set_defaults(fn=cmd_report)

    p_att = sub.add_parser("attack", help="fault-injection run")
    common(p_att)
    p_att.add_argument("--expect-violation", action="store_true",
                       help="exit 0 when the injected attacks are detected")
    p_att.set_defaults(fn=cmd_attack)

    p_val = sub.add_parser("validate-config", help="check a config file")
    p_val.add_argument("--config", required=False)
    p_val.set_defaults(fn=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
