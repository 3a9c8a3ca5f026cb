"""``dppo`` command line: train, eval, verify, plot.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 runtime fault.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigError, DPPOError, VerificationError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
           "debug": logging.DEBUG}

log = logging.getLogger("dppo")


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 means verification failure here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(f"{self.prog}: error: {message}")


def _setup_logging():
    name = os.environ.get("DPPO_LOG", "warn").strip().lower()
    level = _LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        log.warning("DPPO_LOG=%r not one of %s; using warn", name, ", ".join(_LEVELS))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dppo", description="PPO with variance-limiting sample dropout")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("train", help="train a policy")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", default="run", help="run directory (default: ./run)")
    t.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; repeatable, applied after the file")
    t.set_defaults(subparser=t)

    e = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--env", required=True)
    e.add_argument("--episodes", type=int, default=20)
    e.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="run the oracle suites")
    v.add_argument("--instances", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)

    pl = sub.add_parser("plot", help="render metrics.csv as SVG curves")
    pl.add_argument("--metrics", required=True)
    pl.add_argument("--out", required=True)
    return p


def _train(args, parser) -> int:
    from .config import parse_config
    from .trainer import train

    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    config = parse_config(args.config, overrides)
    if not config.env_id:
        parser.print_usage(sys.stderr)
        print("dppo train: env_id is not set; add 'env_id = cartpole' to the config "
              "or pass --set env_id=<id> (cartpole, chain:<n>, randmdp:<S>x<A>:<seed>)",
              file=sys.stderr)
        return EXIT_USAGE
    result = train(config, args.out)
    print(f"run directory: {result.run_dir}")
    print((result.run_dir / "final_report.txt").read_text(), end="")
    return EXIT_OK


def _eval(args) -> int:
    from .trainer import evaluate

    if args.episodes < 1:
        raise ConfigError(f"--episodes must be >= 1, got {args.episodes}", key="episodes")
    mean, returns = evaluate(args.checkpoint, args.env, args.episodes, args.seed)
    print(f"episodes = {len(returns)}")
    print(f"mean_return = {mean!r}")
    print("returns = " + " ".join(repr(r) for r in returns))
    return EXIT_OK


def _verify(args) -> int:
    from .verify import run_all

    if args.instances < 1:
        raise ConfigError(f"--instances must be >= 1, got {args.instances}", key="instances")
    results = run_all(args.instances, args.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    total = sum(r.instances for r in results)
    print(f"{total} instances across {len(results)} suites; "
          + ("all passed" if not failed else "failed: " + ", ".join(failed)))
    return EXIT_VERIFY if failed else EXIT_OK


def _plot(args) -> int:
    from .plotting import plot_metrics

    for path in plot_metrics(args.metrics, args.out):
        print(path)
    return EXIT_OK


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    _setup_logging()
    try:
        if args.command == "train":
            return _train(args, args.subparser)
        if args.command == "eval":
            return _eval(args)
        if args.command == "verify":
            return _verify(args)
        return _plot(args)
    except ConfigError as exc:
        print(f"dppo {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"dppo {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DPPOError, OSError) as exc:
        print(f"dppo {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
