"""Command-line front end.

Exit status: 0 when every requested check matches its expected verdict,
1 when at least one does not, 2 on a configuration error (or any check
error under ``--strict``).
"""

from __future__ import annotations

import argparse
import json
import sys

import yaml

from . import __version__
from .errors import ConfigError, QfiError
from .experiment import CHANNEL_NAMES, FAMILY_NAMES, RunReport, load_config, rows_to_csv, run, sweep

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfi-broadcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--output", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--strict", action="store_true", help="turn check errors into exit status 2")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads across grid points / sweep values")

    common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="run one experiment per value of a config parameter")
    common(sw)
    sw.add_argument("--vary", required=True, help="dotted parameter path, e.g. channel.n_parties")
    sw.add_argument("--values", required=True, help="YAML list, e.g. '[2, 3, 4]'")
    sub.add_parser("list-families")
    sub.add_parser("list-channels")
    sub.add_parser("version")
    return p


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _render(reports: list[RunReport], fmt: str, single: bool) -> str:
    if fmt == "csv":
        return rows_to_csv([row for r in reports for c in r.checks for row in c.rows])
    if single:
        return reports[0].to_json()
    return json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2, allow_nan=False)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "list-families":
        print("\n".join(sorted(FAMILY_NAMES)))
        return EXIT_OK
    if args.command == "list-channels":
        print("\n".join(sorted(CHANNEL_NAMES)))
        return EXIT_OK
    try:
        config = load_config(args.config)
        fmt = args.format or config.output.get("format", "json")
        output = args.output or config.output.get("path")
        if args.command == "run":
            reports = [run(config, args.seed, args.strict, args.jobs)]
        else:
            values = yaml.safe_load(args.values)
            if not isinstance(values, list):
                raise ConfigError("--values must be a YAML list")
            reports = sweep(config, args.vary, values, args.seed, args.strict, args.jobs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (QfiError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(_render(reports, fmt, args.command == "run"), output)
    for r in reports:
        for c in r.checks:
            if not c.passed:
                print(f"check {c.name}: got {c.verdict}, expected {c.expected}"
                      + (f" ({c.error})" if c.error else ""), file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL
