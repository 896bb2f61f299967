"""MAE versus missing-data rate (25%-80%) for tensor completion and linear
interpolation on a seeded synthetic scene."""
import argparse
import logging

from tensorfill.evaluation import random_rate_sweep, run_sweep, sweep_csv
from tensorfill.synthetic import SynthConfig, synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--years", type=int, default=18)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="fig9a.csv")
    a = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    stack = synthesize(SynthConfig(height=a.size, width=a.size, years=a.years, seed=a.seed)).stack
    rows = run_sweep(stack, random_rate_sweep(seed=a.seed), ["tensor", "linear"])
    text = sweep_csv(rows)
    open(a.out, "w").write(text)
    print(text, end="")


if __name__ == "__main__":
    main()
