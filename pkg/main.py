"""
Main entry point for SDP Code Bounds.

    python main.py bound   --config run.json [--out report.json] [--log-iterations]
    python main.py lp      --config run.json [--out report.json]
    python main.py recover --config run.json [--out report.json]
    python main.py verify  --config run.json [--out report.json]
    python main.py table one-sided [--m 6] [--out table.json]
"""
import argparse
import json
import logging
import logging.config
import sys
from typing import List, Optional

import structlog

from app.config import Config
from app.cli.commands import EXIT_OK, EXIT_VALIDATION, run_from_path, run_one_sided_table, table_document
from app.utils.serialization import write_json


def configure_logging(level: Optional[str] = None):
    """
    Configure structured logging with structlog.

    Logs go to stderr so that stdout carries only the report document:
    - DEBUG: Human-readable console output
    - otherwise: JSON formatted logs
    """
    level = level or Config.LOG_LEVEL
    is_development = level == "DEBUG"

    logging.config.dictConfig({
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "plain": {
                "()": structlog.stdlib.ProcessorFormatter,
                "processor": structlog.dev.ConsoleRenderer(colors=False),
            },
            "json": {
                "()": structlog.stdlib.ProcessorFormatter,
                "processor": structlog.processors.JSONRenderer(),
            },
        },
        "handlers": {
            "default": {
                "level": level,
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
                "formatter": "plain" if is_development else "json",
            },
        },
        "loggers": {
            "": {
                "handlers": ["default"],
                "level": level,
                "propagate": True,
            },
        }
    })

    shared_processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if is_development:
        processors = shared_processors + [
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ]
    else:
        processors = shared_processors + [
            structlog.processors.dict_tracebacks,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ]

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdp-code-bounds",
        description="Semidefinite and linear programming bounds for codes in spheres and Hamming spaces",
    )
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)
    commands = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("bound", "Solve a relaxation and report the code-size bound"),
        ("lp", "Delsarte LP bound, from a grid LP or an explicit polynomial"),
        ("recover", "Recover an atomic distance distribution from power sums"),
        ("verify", "Check a rational certificate in exact arithmetic"),
    ):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("--config", required=True, help="Run configuration (JSON)")
        sub.add_argument("--out", default=None, help="Write the report here as well")
        sub.add_argument("--log-iterations", action="store_true", help="Print solver iterations to stderr")

    table = commands.add_parser("table", help="Reproduce a comparison table")
    table.add_argument("which", choices=["one-sided"])
    table.add_argument("--m", type=int, default=Config.TABLE_ORDER)
    table.add_argument("--dimensions", type=int, nargs="+", default=list(Config.TABLE_DIMENSIONS))
    table.add_argument("--out", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    logger = structlog.get_logger("main")

    try:
        Config.validate()
    except ValueError as e:
        logger.error("configuration_error", error=str(e))
        return EXIT_VALIDATION

    if args.command == "table":
        rows, text = run_one_sided_table(args.dimensions, args.m)
        print(text)
        if args.out:
            write_json(table_document(rows, args.m), args.out)
        return EXIT_OK

    iteration_log = sys.stderr if args.log_iterations else None
    code, document = run_from_path(args.command, args.config, args.out, iteration_log)
    print(json.dumps(document, indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
