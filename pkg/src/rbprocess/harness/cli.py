"""``rbprocess`` command line.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure,
3 a verification check failed (kernel-check, autocov, ac-verify).
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigurationError, NumericalError
from .config import EXPERIMENTS, VERIFY_EXPERIMENTS, build_config, load_config
from .experiments import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CHECK = 3

logger = logging.getLogger("rbprocess")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="strict JSON experiment config")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--jobs", type=int, default=1, metavar="INT", help="worker processes")
    common.add_argument("--svg", type=_bool, default=True, metavar="BOOL", help="render SVG charts (default: true)")
    common.add_argument("--base-seed", type=int, metavar="INT", help="overrides base_seed from the config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="rbprocess", description="Replay-buffer process experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common])
        if name == "kernel-check":
            p.add_argument("--n-max", type=int, metavar="INT", help="largest buffer size to enumerate")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
        overrides = {}
        if args.base_seed is not None:
            overrides["base_seed"] = args.base_seed
        if getattr(args, "n_max", None) is not None:
            overrides["n_max"] = args.n_max
        if args.config:
            cfg = load_config(args.config, args.command, overrides)
        else:
            cfg = build_config(overrides, args.command)
    except ConfigurationError as exc:
        print(f"rbprocess: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        manifest = run_experiment(cfg, args.out, jobs=args.jobs, svg=args.svg)
    except ConfigurationError as exc:
        print(f"rbprocess: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"rbprocess: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rbprocess: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    failed = [c for c in manifest.checks if not c["passed"]]
    for c in manifest.checks:
        logger.info("%s %s: %s (%s)", "PASS" if c["passed"] else "FAIL", c["name"], c["value"], c["tolerance"])
    print(f"{cfg.experiment}: {len(manifest.files)} files written to {args.out}; "
          f"{len(manifest.checks) - len(failed)}/{len(manifest.checks)} checks passed")
    if failed and cfg.experiment in VERIFY_EXPERIMENTS:
        for c in failed:
            print(f"FAIL {c['name']}: {c['value']} ({c['tolerance']})", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
