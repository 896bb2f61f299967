"""Block-gap MAE with and without the pixel x day x year rearrangement."""
import argparse
import logging

from tensorfill.evaluation import block_sweep, run_sweep, sweep_csv
from tensorfill.synthetic import SynthConfig, synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--years", type=int, default=18)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lengths", default="2,4,6,8,10,12")
    ap.add_argument("--out", default="fig10.csv")
    a = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    stack = synthesize(SynthConfig(height=a.size, width=a.size, years=a.years, seed=a.seed)).stack
    lengths = [int(v) for v in a.lengths.split(",")]
    rows = run_sweep(stack, block_sweep(stack, lengths, seed=a.seed), ["tensor", "tensor_original"])
    text = sweep_csv(rows)
    open(a.out, "w").write(text)
    print(text, end="")


if __name__ == "__main__":
    main()
