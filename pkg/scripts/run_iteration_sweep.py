#!/usr/bin/env python3
"""Median iterations to recover an 8x4 matrix from its Gram matrix, as a
function of the random subspace dimension K.

Desk scale by default (200 trials per K); pass --paper-scale for 10,000.

    python3 scripts/run_iteration_sweep.py --out results/iterations.csv
"""
import sys

from gramphase.cli import main

if __name__ == "__main__":
    argv = ["exp-iterations", "--K", "2,4,6,8", "--seed", "2026"]
    sys.exit(main(argv + sys.argv[1:]))
