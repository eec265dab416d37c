"""Command line entry point.

Subcommands::

    quantcredit run         full pipeline: grids, filter, curve, plots
    quantcredit quantize    build and cache the quantizer grids only
    quantcredit filter      grids + observation + filter CSV
    quantcredit curve       grids + filter + spread-curve CSV
    quantcredit convergence numerics sweeps (--sweep kind=v1,v2,...)

Exit codes: 0 success, 1 configuration or input validation failure,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ConfigParseError, load_config
from .filtering import save_filter_csv, run_filter
from .pipeline import (
    ObservationMisalignedError,
    observation_path,
    prepare_grids,
    run_convergence,
    run_pipeline,
    save_observation_csv,
)
from .rng import derive_key
from .spreads import save_curve_csv, spread_curve


def _add_common(p: argparse.ArgumentParser, obs_flags: bool = True):
    p.add_argument("--config", required=True, help="scenario config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the output directory")
    if obs_flags:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--simulate-obs", action="store_true",
                           help="simulate the observed path (default)")
        group.add_argument("--obs-file", default=None,
                           help="CSV of time,price aligned with the filter grid")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantcredit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "filter", "curve"):
        _add_common(sub.add_parser(name))
    _add_common(sub.add_parser("quantize"), obs_flags=False)
    conv = sub.add_parser("convergence")
    _add_common(conv, obs_flags=False)
    conv.add_argument("--sweep", required=True,
                      help="sweep spec, e.g. mc_trials=1000,4000,16000 or euler_steps=25,50,100")
    return parser


def _load(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, output_dir=args.out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        out = Path(cfg.output_dir)
        if args.command == "run":
            paths = run_pipeline(cfg, obs_file=args.obs_file)
            for name, path in paths.items():
                print(f"{name}: {path}")
        elif args.command == "quantize":
            out.mkdir(parents=True, exist_ok=True)
            _, _, cache = prepare_grids(cfg, out)
            print(f"grids: {cache}")
        elif args.command in ("filter", "curve"):
            out.mkdir(parents=True, exist_ok=True)
            grid = cfg.time_grid()
            sequence, transitions, cache = prepare_grids(cfg, out)
            obs = observation_path(cfg, args.obs_file)
            save_observation_csv(out / "observation.csv", grid, obs.values)
            filt = run_filter(obs, sequence, transitions, cfg.firm, cfg.observation, grid)
            save_filter_csv(out / "filter.csv", filt)
            print(f"filter: {out / 'filter.csv'}")
            if args.command == "curve":
                curve = spread_curve(
                    filt, cfg.firm, cfg.scenario, cfg.scenario.maturities,
                    cfg.euler_schedule, cfg.mc_trials, derive_key(cfg.seed, "survival-mc"),
                    weight_floor=cfg.weight_floor, workers=cfg.workers,
                )
                save_curve_csv(out / "curve.csv", curve, cfg.config_hash(), cfg.seed)
                print(f"curve: {out / 'curve.csv'}")
        elif args.command == "convergence":
            kind, _, values = args.sweep.partition("=")
            if not values:
                raise ConfigError([f"--sweep: expected kind=v1,v2,..., got {args.sweep!r}"])
            path = run_convergence(cfg, kind.strip(), [int(v) for v in values.split(",")])
            print(f"convergence: {path}")
    except (ConfigError, ConfigParseError, ObservationMisalignedError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
