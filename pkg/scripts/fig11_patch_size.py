"""Tensor-completion MAE over spatial patch sizes at several missing rates."""
import argparse
import logging

from tensorfill.evaluation import ScenarioKind, ScenarioSpec, run_sweep, sweep_csv
from tensorfill.synthetic import SynthConfig, synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--years", type=int, default=18)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--patch-sizes", default="4,8,12,16,20")
    ap.add_argument("--rates", default="0.3,0.5,0.7")
    ap.add_argument("--out", default="fig11.csv")
    a = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    stack = synthesize(SynthConfig(height=a.size, width=a.size, years=a.years, seed=a.seed)).stack
    sizes = [int(v) for v in a.patch_sizes.split(",")]
    lines = []
    for rate in (float(v) for v in a.rates.split(",")):
        spec = ScenarioSpec(ScenarioKind.RANDOM, target_rate=rate, seed=a.seed)
        body = sweep_csv(run_sweep(stack, sizes, ["tensor"], scenario=spec)).splitlines()
        if not lines:
            lines.append("rate," + body[0])
        lines += [f"{rate:g},{row}" for row in body[1:]]
    text = "\n".join(lines) + "\n"
    open(a.out, "w").write(text)
    print(text, end="")


if __name__ == "__main__":
    main()
