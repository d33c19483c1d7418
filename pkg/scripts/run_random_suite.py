#!/usr/bin/env python3
"""Bulk experiment over random certified instances.

For each kept draw: solve the game Riccati equation, check the single-player
sandwich, synthesize the saddle feedback, and cross-check the value against
the discrete-time oracle.  Prints a one-line summary per instance and a
final tally.

Usage: run_random_suite.py [count] [seed]
"""

import sys
import time

import numpy as np

from lqgame import (
    SolverConfig, certify_A3, comparison_check, discrete_oracle,
    feedback_gain, game_value, solve_riccati,
)
from lqgame.fixtures import random_problem


def main(count: int = 25, seed: int = 0) -> int:
    config = SolverConfig(n_steps=400)
    rng = np.random.default_rng(seed)
    kept = tried = 0
    t0 = time.perf_counter()
    while kept < count:
        problem = random_problem(rng)
        tried += 1
        cert = certify_A3(problem, config)
        if not cert.certified:
            continue
        kept += 1
        sol = solve_riccati(problem, config, "game")
        cmp = comparison_check(sol, cert.p1, cert.p2)
        x = np.ones(problem.n)
        value = game_value(sol, x)
        oracle, _ = discrete_oracle(problem, x, 64)
        theta0 = feedback_gain(problem, sol).theta_nodes[0]
        print(f"[{kept:3d}] n={problem.n} m=({problem.m1},{problem.m2}) "
              f"value={value:+.5f} oracle64={oracle:+.5f} "
              f"sandwich={'ok' if cmp.passed else 'VIOLATED'} "
              f"|Theta(0)|={np.abs(theta0).max():.3f}")
        if not cmp.passed:
            return 1
    print(f"\n{kept} certified / {tried} drawn "
          f"in {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    argv = [int(a) for a in sys.argv[1:]]
    sys.exit(main(*argv))
