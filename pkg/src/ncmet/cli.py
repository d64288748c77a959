"""Command line entry point: ``ncmet run|props|preset``.

Exit codes: 0 everything passed, 1 a criterion or property check failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .batteries import SUITES, property_battery
from .config import ExperimentConfig
from .errors import ConfigurationError, UsageError
from .presets import preset, preset_data, preset_names
from .runner import dumps, run

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ncmet", description="Multiplicative ergodic theorem estimators for tracial algebras.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="path to an experiment JSON file")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--plots", action="store_true", help="also render PNG figures")

    pr = sub.add_parser("props", help="run a property battery")
    pr.add_argument("suite", choices=sorted(SUITES))
    pr.add_argument("--trials", type=int, default=100)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--json", action="store_true", help="print the full result as JSON")

    ps = sub.add_parser("preset", help="run a built-in experiment")
    ps.add_argument("name", nargs="?")
    ps.add_argument("--list", action="store_true", help="list preset names")
    ps.add_argument("--dump", action="store_true", help="print the preset config instead of running it")
    ps.add_argument("--out", help="output directory (overrides output.dir)")
    ps.add_argument("--plots", action="store_true", help="also render PNG figures")
    return p


def _run(config: ExperimentConfig, out, plots: bool) -> int:
    report = run(config)
    paths = report.write(out, plots=plots or None)
    for s in report.seeds:
        if s.error:
            print(f"seed {s.seed}: {s.error}", file=sys.stderr)
    for c in report.criteria:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: worst {c['worst']!r} (tolerance {c['tolerance']!r})")
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def _props(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    result = property_battery(args.suite, args.trials, args.seed)
    if args.json:
        print(dumps(result.to_json()), end="")
    else:
        for c in result.checks:
            status = "PASS" if c.passed else "FAIL"
            side = "<=" if c.upper else ">="
            print(f"{status} {result.name}.{c.name}: worst {c.worst!r} {side} {c.bound!r}")
    return EXIT_PASS if result.passed else EXIT_FAIL


def _preset(args) -> int:
    if args.list:
        for name in preset_names():
            print(name)
        return EXIT_PASS
    if not args.name:
        raise UsageError("preset name required (see --list)")
    if args.dump:
        print(dumps(preset_data(args.name)), end="")
        return EXIT_PASS
    return _run(preset(args.name), args.out, args.plots)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command == "run":
            return _run(ExperimentConfig.load(args.config), args.out, args.plots)
        if args.command == "props":
            return _props(args)
        return _preset(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"ncmet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
