"""Command-line front end for the link simulator.

Subcommands map onto the pipeline stages: ``simulate`` produces a sample
store on disk, the analysis subcommands (``characterize``,
``optimize-mask``, ``optimize-constellation``, ``boxplot``, ``report``)
work from a stored run without re-propagating anything, and ``validate``
runs the physics checklist for a configuration. Exit code is 0 on
success, 1 on a named failure, and argparse's usual 2 on bad usage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig, desk_config, load_config, paper_config
from .detection import fit_symbol_stats
from .constellation import optimize_constellation
from .pipeline import (
    SampleStore,
    characterize,
    emit_boxplot_data,
    optimize_mask,
    run_simulation,
    save_boxplot_rows,
    validate_physics,
)
from .topology import MaskSpec


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON configuration file")
    p.add_argument(
        "--preset",
        choices=("paper", "desk"),
        default="desk",
        help="built-in parameter set when no --config is given (default: desk)",
    )
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--trials", type=int, help="override trials per symbol")
    p.add_argument(
        "--levels",
        type=str,
        help="override turbulence levels, comma-separated Cn2 values",
    )
    p.add_argument(
        "--mask",
        type=str,
        help="fixed mask label, e.g. scaled-mean:a=0.35 or none",
    )


def _add_out_flag(p: argparse.ArgumentParser):
    p.add_argument(
        "--out",
        type=Path,
        default=Path("skmsim-out"),
        help="run directory (default: ./skmsim-out)",
    )


def _build_config(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset == "paper":
        cfg = paper_config()
    else:
        cfg = desk_config()
    levels = None
    if args.levels is not None:
        levels = tuple(float(v) for v in args.levels.split(","))
    mask = None
    if args.mask is not None:
        mask = MaskSpec.from_label(args.mask)
    return cfg.with_overrides(
        trials=args.trials, base_seed=args.seed, levels=levels, mask=mask
    )


def _load_store(args) -> SampleStore:
    return SampleStore.load(args.out)


def _m_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _cmd_simulate(args) -> int:
    cfg = _build_config(args)
    store = run_simulation(
        cfg, out_dir=args.out, progress=lambda msg: print(msg, file=sys.stderr)
    )
    print(f"store written to {args.out} ({len(store.samples)} samples)")
    return 0


def _cmd_characterize(args) -> int:
    store = _load_store(args)
    report = characterize(store, m_list=_m_list(args.m))
    report.save(args.out)
    sys.stdout.write(report.to_tsv())
    return 0


def _cmd_optimize_mask(args) -> int:
    store = _load_store(args)
    for cn2 in store.levels():
        best = optimize_mask(store, cn2, kind=args.mask)
        print(f"{cn2!r}\t{best.label}")
    return 0


def _cmd_optimize_constellation(args) -> int:
    store = _load_store(args)
    for cn2 in store.levels():
        mask = store.config.mask.label if store.config.mask is not None else (
            optimize_mask(store, cn2, "scaled-mean").label
        )
        stats = fit_symbol_stats(store.symbol_samples(cn2, mask))
        search = optimize_constellation(stats, args.m)
        print(f"# cn2={cn2!r} mask={mask} size={args.m}")
        for ranked in search.ranked:
            symbols = ",".join(str(s) for s in ranked.symbols)
            print(f"{ranked.capacity:.6f}\t{symbols}")
    return 0


def _cmd_boxplot(args) -> int:
    store = _load_store(args)
    rows = emit_boxplot_data(store)
    path = save_boxplot_rows(rows, args.out / "boxplot.tsv")
    print(f"boxplot data written to {path} ({len(rows)} rows)")
    return 0


def _cmd_validate(args) -> int:
    cfg = _build_config(args)
    checklist = validate_physics(cfg, full=args.full)
    print(checklist.to_text())
    return 0 if checklist.passed else 1


def _cmd_report(args) -> int:
    store = _load_store(args)
    report = characterize(store, m_list=_m_list(args.m))
    report.save(args.out)
    rows = emit_boxplot_data(store)
    save_boxplot_rows(rows, args.out / "boxplot.tsv")
    sys.stdout.write(report.to_tsv())
    print(f"report and boxplot data written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skmsim",
        description="skyrmion-number link simulator and channel analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the Monte Carlo and persist the store")
    _add_config_flags(p)
    _add_out_flag(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("characterize", help="mask tuning, fits, and capacity per level")
    _add_out_flag(p)
    p.add_argument("--m", default="4,8,16", help="constellation sizes (default 4,8,16)")
    p.set_defaults(func=_cmd_characterize)

    p = sub.add_parser("optimize-mask", help="pick the stored mask closest to vacuum")
    _add_out_flag(p)
    p.add_argument(
        "--mask",
        default="scaled-mean",
        choices=("scaled-mean", "top-fraction", "super-gaussian"),
        help="mask family to tune over the stored sweep",
    )
    p.set_defaults(func=_cmd_optimize_mask)

    p = sub.add_parser(
        "optimize-constellation", help="rank subsets of one size by capacity"
    )
    _add_out_flag(p)
    p.add_argument("--m", type=int, default=8, help="constellation size (default 8)")
    p.set_defaults(func=_cmd_optimize_constellation)

    p = sub.add_parser("boxplot", help="emit per-symbol quartile records")
    _add_out_flag(p)
    p.set_defaults(func=_cmd_boxplot)

    p = sub.add_parser("validate", help="physics checklist for a configuration")
    _add_config_flags(p)
    p.add_argument("--full", action="store_true", help="include slow screen statistics")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("report", help="characterize + boxplot from a stored run")
    _add_out_flag(p)
    p.add_argument("--m", default="4,8,16", help="constellation sizes (default 4,8,16)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # argparse owns usage errors; name run failures here
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
