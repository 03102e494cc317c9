"""Command-line entry point.

``activegrowth run <experiment> [--flag ...] --config <file> --seed <n> --out <dir>``
runs one experiment; ``activegrowth compare_golden <run> <golden>`` checks a
run against reference outputs.  Exit status is 0 on success, 1 on a runtime
failure or golden mismatch and 2 on bad arguments or config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments


def _parser():
    p = argparse.ArgumentParser(prog="activegrowth")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", choices=experiments.EXPERIMENTS)
    r.add_argument("--config", help="JSON file of settings (merged over the defaults)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--depth", type=int, help="deepest planning depth (hanoi)")
    r.add_argument("--trials", type=int, help="number of goal trials (hanoi)")
    r.add_argument("--steps", type=int, help="babbling steps")
    r.add_argument("--phase", choices=("structure", "babble", "goal", "all"), help="stages to run (gridworld)")
    r.add_argument("--classes", type=int, nargs="+", help="digit classes (mnist)")
    r.add_argument("--exemplars", type=int, help="training exemplars per class (mnist)")
    r.add_argument("--pixels", type=int, help="retained pixels (mnist)")
    r.add_argument("--quiet", action="store_true")
    g = sub.add_parser("compare_golden", help="compare a run directory with golden outputs")
    g.add_argument("run_dir")
    g.add_argument("golden_dir")
    g.add_argument("--tolerances", help="JSON file mapping metric or column names to {rel, abs}")
    return p


FLAG_KEYS = {
    "mnist": {"classes": "classes", "exemplars": "n_train", "pixels": "n_pixels"},
    "gridworld": {"steps": "babble_steps", "phase": "phase"},
    "hanoi": {"depth": "depth", "trials": "trials", "steps": "babble_steps"},
    "unit-oracles": {},
}


def _overrides(args):
    keys = FLAG_KEYS[args.experiment]
    out = {}
    for flag in ("depth", "trials", "steps", "phase", "classes", "exemplars", "pixels"):
        value = getattr(args, flag)
        if value is None:
            continue
        if flag not in keys:
            raise experiments.ConfigError(f"--{flag} does not apply to {args.experiment}")
        out[keys[flag]] = value
    return out


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "compare_golden":
        tol = None
        if args.tolerances:
            try:
                with open(args.tolerances) as fh:
                    tol = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                print(f"error: cannot read tolerances: {exc}", file=sys.stderr)
                return 2
        problems = experiments.compare_golden(args.run_dir, args.golden_dir, tol)
        for line in problems:
            print(line)
        print("match" if not problems else f"{len(problems)} difference(s)")
        return 1 if problems else 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = experiments.load_config(args.experiment, args.config, _overrides(args))
    except experiments.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        metrics = experiments.run(args.experiment, cfg, args.seed, args.out)
    except Exception as exc:  # report any failure as a diagnostic, not a traceback
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"error: {args.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        shown = {k: v for k, v in metrics.items() if not isinstance(v, (list, dict))}
        print(json.dumps(experiments._round(shown), indent=2, sort_keys=True))
    return 0
