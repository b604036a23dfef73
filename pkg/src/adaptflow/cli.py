"""``adaptflow`` command line: run, plan, validate, gradcheck.

Exit codes: 0 ok, 1 check failure, 2 input error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .errors import AdaptflowError, MissingKey, NonFiniteGradient, NonFiniteLoss
from .io import FormatError, read_dump
from .validators import get_validator

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from .experiment import run_experiment

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_INPUT
    out = Path(args.out) if args.out else Path("runs") / Path(args.config).stem
    try:
        summary = run_experiment(cfg, out)
    except (NonFiniteLoss, NonFiniteGradient) as exc:
        _err(str(exc))
        return EXIT_NUMERIC
    print(f"run directory: {out}")
    print(f"best_score={summary['best_score']} best_epoch={summary['best_epoch']} "
          f"oracle_target_accuracy={summary['oracle_target_accuracy']:.4f}")
    return EXIT_OK


def cmd_plan(args) -> int:
    from .plan import plan_experiment

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_INPUT
    plan = plan_experiment(cfg)
    print(json.dumps(plan.to_dict(), indent=2) if args.json else plan.render())
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        splits = read_dump(args.dump)
        score = get_validator(args.validator)(**splits)
    except (FormatError, MissingKey) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        _err(f"{args.dump}: {exc.strerror}")
        return EXIT_INPUT
    except AdaptflowError as exc:
        _err(str(exc))
        return EXIT_INPUT
    print(repr(score))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import TOLERANCE, run_gradcheck

    results = run_gradcheck(args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max_rel_error={r.max_rel_error:.3e}  {status}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"gradient check failed (tolerance {TOLERANCE:g}): {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="run directory (default runs/<config name>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plan", help="show which context keys one training step computes or reuses")
    p.add_argument("config")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="score a saved inference dump")
    p.add_argument("dump")
    p.add_argument("--validator", choices=["bnm", "accuracy"], required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
