"""Command line: ``capflow run|validate <config>`` and ``capflow list-studies``."""
from __future__ import annotations

import argparse
import logging
import sys

from .harness import EXIT_OK, EXIT_VALIDATION, STUDY_HELP, ConfigError, load_config, run_config


def main(argv=None):
    ap = argparse.ArgumentParser(prog="capflow", description="Two-phase free-boundary verification studies.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run the study named in a config file")
    p.add_argument("config")
    p = sub.add_parser("validate", help="check a config file without running it")
    p.add_argument("config")
    sub.add_parser("list-studies", help="print the available study names")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")

    if args.cmd == "list-studies":
        for name, text in STUDY_HELP.items():
            print(f"{name:18s} {text}")
        return EXIT_OK
    if args.cmd == "validate":
        try:
            load_config(args.config)
        except ConfigError as exc:
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print("ok")
        return EXIT_OK
    code, _ = run_config(args.config)
    return code


if __name__ == "__main__":
    sys.exit(main())
