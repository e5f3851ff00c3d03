#!/usr/bin/env python3
"""Median recovery error from the Gram matrix of a noise-perturbed 8x4
matrix, as a function of the noise level, with the signal in a random
subspace (dimension 10 by default, matching the structure's effective
dimension; see the README for why recovery is non-unique right at that
boundary and pass --K 4 for the well-posed regime).

    python3 scripts/run_noise_sweep.py --out results/noise.csv
    python3 scripts/run_noise_sweep.py --K 4 --out results/noise_k4.csv
"""
import sys

from gramphase.cli import main

if __name__ == "__main__":
    argv = ["exp-noise", "--sigma", "1e-4,1e-3,1e-2,1e-1", "--seed", "2026"]
    sys.exit(main(argv + sys.argv[1:]))
