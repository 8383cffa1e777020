"""Command-line entry point.

Subcommands map one-to-one onto the benchmark protocols:

    upliftbench generate     --config cfg.json --out out/
    upliftbench validate     [--data file.csv[.gz]] [--config cfg.json]
    upliftbench separability --config cfg.json [--out out/]
    upliftbench ite-bench    --config cfg.json [--out out/] [--workers 4]

Exit codes: 0 success, 1 usage error, 2 data error, 3 experiment failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import PROTOCOLS, ConfigError, ExperimentConfig, run
from .data import ParseError, SchemaError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_EXPERIMENT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="upliftbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="protocol", required=True)
    for protocol in PROTOCOLS:
        p = sub.add_parser(protocol)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--data", help="real dataset CSV (optionally .gz)")
        p.add_argument("--out", help="output directory for reports and files")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="parallel worker processes")
    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    raw["protocol"] = args.protocol
    if args.data:
        raw["data_path"] = args.data
    if args.out:
        raw["out_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    return ExperimentConfig.from_dict(raw)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except (ConfigError, json.JSONDecodeError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = run(config)
    except (FileNotFoundError, SchemaError, ParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - surface everything else as experiment failure
        print(f"experiment failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT

    print(report.render_text())
    if config.out_dir:
        print(f"report written to {config.out_dir}/report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
