#!/usr/bin/env python3
"""Steady 2D Euler flow workbench.

Examples:
    python workbench.py residual --field sinsin
    python workbench.py flux --field radial-poly --p 2
    python workbench.py moving-plane --field radial-poly --directions 16
    python workbench.py counterexample --curve ellipse --delta 0.2 --orders 16,48
    python workbench.py analyze --spec field.spec --no-timestamp

Exit codes: 0 success, 1 usage or workbench error, 2 non-steady input,
3 inconclusive classification.
"""

import argparse
import logging
import sys

from steadyflow import controller


def setup_logging(argv=None):
    """Log to a file and the console, the level and file taken from the command line."""
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--log-level", type=str, default="INFO")
    pre.add_argument("--log-file", type=str, default="workbench.log")
    known, _ = pre.parse_known_args(argv)
    level = getattr(logging, known.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format='%(levelname)s:%(message)s',
                        handlers=[logging.FileHandler(known.log_file or "workbench.log", 'w'),
                                  logging.StreamHandler()])


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    setup_logging(argv)
    return controller.main(argv)


if __name__ == '__main__':
    sys.exit(main())
