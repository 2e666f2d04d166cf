"""Command line: ``rvint run|validate|list-experiments``.

Exit status is 0 when every check row passes, otherwise the number of
failed rows (capped at 100).  Configuration errors exit with 2 only when
no experiment ran; they are printed with their field paths.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import DESCRIPTIONS, EXPERIMENTS, ConfigError, load_config
from .experiments import OUT_DIR_ENV, run_experiment

MAX_EXIT = 100


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["experiment.seed"] = args.seed
    if args.mc is not None:
        out["experiment.mc"] = args.mc
    if args.workers is not None:
        out["experiment.workers"] = args.workers
    if args.out_dir is not None:
        out["experiment.out_dir"] = args.out_dir
    return out


def _load(args):
    try:
        return load_config(args.config, _overrides(args))
    except ConfigError as exc:
        for path, msg in exc.failures:
            print(f"config error [{path}]: {msg}", file=sys.stderr)
        return None
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    cfg = _load(args)
    if cfg is None:
        return 2
    out_dir = cfg.experiment.out_dir or os.environ.get(OUT_DIR_ENV) or "results"
    result = run_experiment(cfg, out_dir)
    print(result.summary())
    with open(os.path.join(result.out_dir, "summary.json"), "w") as fh:
        json.dump({"experiment": result.experiment, "config_hash": result.config_hash, "seed": result.seed,
                   "passed": result.passed, "failed_rows": result.failed_rows,
                   "wall_clock_seconds": result.wall_clock}, fh, indent=2)
    print(f"wrote {result.out_dir}")
    return min(result.failed_rows, MAX_EXIT)


def cmd_validate(args) -> int:
    cfg = _load(args)
    if cfg is None:
        return 2
    print(f"ok: {cfg.name} config_hash={cfg.config_hash()}")
    return 0


def cmd_list(args) -> int:
    for name in EXPERIMENTS:
        print(f"{name:20s} {DESCRIPTIONS[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "run an experiment and write CSVs"),
                            ("validate", cmd_validate, "check a configuration without running")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="INI-style experiment configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--mc", type=int, help="Monte Carlo replicas")
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
        p.add_argument("--workers", type=int, help="threads for Monte Carlo chunks")
        p.set_defaults(fn=fn)
    p = sub.add_parser("list-experiments", help="list experiment names")
    p.set_defaults(fn=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
