"""Command line: ``nrpower run | validate | presets``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ScenarioConfig, load_config, preset, preset_names
from .runner import run_batch


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrpower", description="5G NR power-saving simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario batch")
    run.add_argument("--config", help="scenario TOML file")
    run.add_argument("--preset", help="named preset; overrides the file's scenario key")
    run.add_argument("--seed-list", type=_seed_list, help="comma-separated seeds")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--duration-s", type=float, help="traffic duration in seconds")
    run.add_argument("--cells", type=int, help="cells per seed")
    run.add_argument("--jobs", type=int, default=1, help="parallel replications")
    run.add_argument("--trace", action="store_true", help="also write the per-UE state trace")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--config", required=True)

    sub.add_parser("presets", help="list preset names")
    return parser


def resolve_run_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config, args.preset)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("run needs --config or --preset")
    if args.seed_list:
        cfg.seeds = args.seed_list
    if args.duration_s is not None:
        cfg.duration_s = args.duration_s
    if args.cells is not None:
        cfg.cells = args.cells
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return 0
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok {cfg.scenario} {cfg.digest()}")
            return 0
        cfg = resolve_run_config(args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        result = run_batch(cfg, args.out, trace=args.trace, jobs=args.jobs)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single-line report for scripts
        print(f"error: run: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    rep = result.outage() if len(result.series) else None
    summary = f"{cfg.scenario}: {len(result.series)} samples"
    if rep is not None:
        summary += f", outage(p={cfg.outage_p:g}) = {rep.value_ms:.3f} ms"
    print(summary)
    print(f"wrote {result.out_dir}")
    return 0
