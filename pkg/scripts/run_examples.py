#!/usr/bin/env python3
"""Run the four benchmark games end to end and print their reports.

Equivalent to `lqgame example <name>` for each bundled instance; handy as a
single smoke check after changes to the solver."""

import sys

from lqgame.cli import build_parser, run_example

NAMES = ("ex4_5", "ex5_2", "ex3_4", "ex3_2")


def main() -> int:
    worst = 0
    for name in NAMES:
        print(f"=== {name} " + "=" * (60 - len(name)))
        args = build_parser().parse_args(
            ["example", name, "--steps", "1000", "--paths", "4000"])
        worst = max(worst, run_example(name, args))
        print()
    return worst


if __name__ == "__main__":
    sys.exit(main())
