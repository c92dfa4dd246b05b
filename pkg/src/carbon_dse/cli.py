"""Command-line front end.

Each study subcommand runs one study of a scenario; ``all`` (alias ``run``)
runs the studies listed in the scenario file. Command-line flags override
scenario-file values, which override built-in defaults.

Exit status: 0 success, 1 invalid input, 2 usage error, 3 infeasible
(diagnosis tables are still written).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from . import scenario as scn
from .errors import CarbonDseError, InfeasibleError

STUDY_COMMANDS = {
    "evaluate": "evaluate",
    "optimize": "optimize",
    "catalog": "catalog",
    "lifetime": "lifetime",
    "provision": "provision",
    "stack3d": "stack3d",
    "replace": "replacement",
}


def _parse_set(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    out = _parse_set(args.set or [])
    if getattr(args, "out", None):
        out["scenario.output_dir"] = args.out
    if getattr(args, "cluster", None):
        # an explicit cluster also replaces the per-study cluster lists
        for key in ("scenario.cluster", "evaluate.clusters", "optimize.clusters"):
            out[key] = args.cluster
    if getattr(args, "beta", None) is not None:
        out["optimize.beta"] = repr(args.beta)
    if getattr(args, "long", False):
        out["scenario.long_format"] = "true"
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carbon-dse", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, run_flags=True):
        p.add_argument("scenario", help="scenario file, or the name of a built-in scenario")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one scenario value (repeatable)")
        if run_flags:
            p.add_argument("--out", help="output directory")
            p.add_argument("--cluster", help="run only this kernel cluster")
            p.add_argument("--beta", type=float, help="embodied weight for optimize")
            p.add_argument("--threads", type=int, help="worker threads (0 = auto); sets CARBON_DSE_THREADS")
            p.add_argument("--long", action="store_true", help="also write plot_long.csv")

    common(sub.add_parser("validate", help="check a scenario and its inputs without running it"), run_flags=False)
    for cmd in STUDY_COMMANDS:
        common(sub.add_parser(cmd, help=f"run the {STUDY_COMMANDS[cmd]} study"))
    for cmd in ("all", "run"):
        common(sub.add_parser(cmd, help="run every study listed in the scenario"))
    sub.add_parser("scenarios", help="list built-in scenarios")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "scenarios":
        for name in scn.builtin_scenarios():
            print(name)
        return scn.EXIT_OK

    try:
        overrides = _overrides(args)
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return scn.EXIT_USAGE

    if args.command == "validate":
        errors = scn.validate(args.scenario, overrides)
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        if not errors:
            print("ok")
        return scn.EXIT_INVALID if errors else scn.EXIT_OK

    if args.threads is not None:
        os.environ["CARBON_DSE_THREADS"] = str(args.threads)
    only = (STUDY_COMMANDS[args.command],) if args.command in STUDY_COMMANDS else None
    try:
        result = scn.run(args.scenario, overrides, only)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return scn.EXIT_INFEASIBLE
    except CarbonDseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return scn.EXIT_INVALID
    for msg in result.messages:
        print(msg)
    print(f"wrote {len(result.files)} files to {result.output_dir}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
