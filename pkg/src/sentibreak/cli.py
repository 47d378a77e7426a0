"""Command-line entry point.

Exit codes: 0 on success, 1 for bad input data, 2 for bad configuration or
usage.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from sentibreak import FORMAT_VERSION, __version__
from sentibreak.errors import ConfigError, DataError

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2

_HELP = {
    "score": "score every document with every configured scorer",
    "series": "daily sentiment series, z-scores and emotion trends",
    "breaks": "BIC-selected structural breaks per series",
    "lagreg": "lagged regressions of the market on sentiment",
    "periods": "Mann-Whitney comparison of the two periods",
    "classify": "naive Bayes and SVM benchmark on labeled documents",
    "simulate": "synthetic step series and corpus with known breaks",
    "all": "series, breaks, lagreg, periods and classify in one go",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors count as configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sentibreak", description="Lexicon sentiment time series and structural breaks.")
    parser.add_argument(
        "--version", action="version", version=f"sentibreak {__version__} (output format {FORMAT_VERSION})"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in _HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", "-c", type=Path, required=True, help="TOML configuration file")
        p.add_argument("--out", "-o", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("-v", "--verbose", action="count", default=0)
        if name == "breaks":
            p.add_argument("--series", type=Path, help="segment this date,value CSV instead of the corpus")
    demo = sub.add_parser("demo", help="write a small synthetic input set with a config file")
    demo.add_argument("directory", type=Path)
    demo.add_argument("--docs-per-day", type=int, default=40)
    demo.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    # imported late so that --version and usage errors stay fast
    from sentibreak import pipeline
    from sentibreak.config import load_config

    try:
        if args.command == "demo":
            cfg_path = pipeline.write_demo(args.directory, args.docs_per_day)
            print(f"wrote demo inputs; run: sentibreak all --config {cfg_path}")
            return EXIT_OK
        cfg = load_config(args.config, args.overrides)
        out_dir = args.out if args.out is not None else cfg.output_dir
        if args.command == "breaks" and args.series is not None:
            if not args.series.is_file():
                raise ConfigError(f"--series: no such file: {args.series}")
            written = pipeline.run_breaks_on_series(args.series, cfg, out_dir)
        else:
            written = pipeline.run(args.command, cfg, out_dir)
    except ConfigError as exc:
        print(f"sentibreak: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"sentibreak: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
