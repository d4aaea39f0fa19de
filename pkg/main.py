#!/usr/bin/env python3
"""
filamentlab <mode> --config <path> [--set key=value ...]

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from config import config
from filamentlab import FilamentLab, FilamentLabError, load_run_config
from filamentlab.runner import EXIT_NUMERICAL, EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="filamentlab", description="Vortex filament numerical laboratory")
    parser.add_argument("mode", choices=config.MODES)
    parser.add_argument("--config", dest="config_path", help="JSON run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration entry (dotted keys, JSON values); repeatable")
    return parser


def _fail(kind: str, reason: str) -> None:
    reason = reason.replace('"', "'").replace("\n", " ")
    print(f'error={kind} reason="{reason}"', file=sys.stderr)


def configure_logging(debug: bool) -> int:
    level = logging.DEBUG if debug else logging.INFO
    logging.basicConfig(level=level)
    # basicConfig is a no-op once the root logger has handlers
    logging.getLogger().setLevel(level)
    return level


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(config.DEBUG)
    args = build_parser().parse_args(argv)

    print("🌀 filamentlab starting up...")
    print(f"   - mode: {args.mode}")
    print(f"   - output: {config.OUTPUT_DIR}{' (from FILAMENTLAB_OUT)' if config.OUTPUT_DIR_FROM_ENV else ''}")
    print(f"   - DEBUG: {config.DEBUG}")

    try:
        run_config = load_run_config(args.mode, args.config_path, args.overrides)
    except FilamentLabError as e:
        _fail(e.kind, str(e))
        return EXIT_VALIDATION if e.kind == "validation" else EXIT_NUMERICAL

    outcome = FilamentLab().run(run_config)
    if outcome.exit_code != 0:
        _fail(outcome.report["kind"], outcome.report["reason"])
    print(json.dumps(outcome.report, sort_keys=True, default=str))
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
