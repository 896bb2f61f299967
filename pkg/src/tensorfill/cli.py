"""Command-line entry point: ``tensorfill <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .completion import CompletionParams
from .evaluation import (
    ScenarioKind,
    ScenarioSpec,
    apply_scenario,
    block_sweep,
    build_reference,
    evaluate_mae,
    gap_mask,
    random_rate_sweep,
    run_sweep,
    simulate_contamination,
    sweep_csv,
    tile_reference,
    whole_series_mask,
)
from .exceptions import TensorfillError
from .grid import RI
from .io import read_series_csv, read_stack, write_stack
from .pipeline import Method, PipelineParams, prefill_linear, reconstruct_scene
from .synthetic import SynthConfig, synthesize
from .trend import FilterParams, iterative_filter_batch

log = logging.getLogger("tensorfill")

SCENARIO_FILE = "scenario.json"


def _bounded(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}")
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise argparse.ArgumentTypeError(f"{v} is out of range")
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise argparse.ArgumentTypeError(f"{v} is out of range")
        return v
    return parse


def _int_range(text):
    """``a:b`` or ``a:b:step``, inclusive of b."""
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] <= 0) or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    step = parts[2] if len(parts) == 3 else 1
    return list(range(parts[0], parts[1] + 1, step))


def _int_list(text):
    try:
        vals = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}")
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError(f"bad list {text!r}")
    return vals


def _methods(text):
    aliases = {"original": Method.TENSOR_ORIGINAL_FORM.value}
    out = []
    for name in text.split(","):
        name = aliases.get(name.strip(), name.strip())
        try:
            out.append(Method(name))
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown method {name!r}")
    return out


@contextmanager
def _staged(out: Path):
    """Write into a sibling staging path and move it into place on success."""
    tmp = out.with_name(out.name + ".partial")
    _remove(tmp)
    try:
        yield tmp
    except BaseException:
        _remove(tmp)
        raise
    _remove(out)
    tmp.rename(out)


def _remove(p: Path):
    if p.is_dir():
        shutil.rmtree(p)
    elif p.exists():
        p.unlink()


def _pipeline_params(a) -> PipelineParams:
    return PipelineParams(
        patch_size=a.patch_size,
        completion=CompletionParams(
            tau=a.tau, rho=a.rho, max_iters=a.max_iters, tol=a.tol,
            use_rearranged_form=not getattr(a, "original_form", False),
        ),
        filter=FilterParams(lam=a.lam),
        workers=a.workers,
        apply_filter=not getattr(a, "no_filter", False),
    )


def _add_solver_args(p):
    p.add_argument("--patch-size", type=_bounded(int, 2), default=8)
    p.add_argument("--tau", type=_bounded(float, 0, 1, True, True), default=0.85)
    p.add_argument("--rho", type=_bounded(float, 0, None, True), default=CompletionParams.rho)
    p.add_argument("--lambda", dest="lam", type=_bounded(float, 0), default=1.0)
    p.add_argument("--max-iters", type=_bounded(int, 1), default=100)
    p.add_argument("--tol", type=_bounded(float, 0, None, True), default=1e-4)
    p.add_argument("--workers", type=_bounded(int, 1), default=1)


# -- commands ------------------------------------------------------------------

def cmd_reconstruct(a):
    stack = read_stack(a.input)
    method = Method.TENSOR_ORIGINAL_FORM if a.original_form else Method.TENSOR
    out = reconstruct_scene(stack, _pipeline_params(a), method)
    with _staged(Path(a.output)) as tmp:
        write_stack(out, tmp)


def cmd_synth(a):
    cfg = SynthConfig(height=a.height, width=a.width, years=a.years, nd=a.nd, seed=a.seed,
                      cloud_rate=a.cloud_rate, marginal_rate=a.marginal_rate)
    scene = synthesize(cfg)
    with _staged(Path(a.output)) as tmp:
        write_stack(scene.stack, tmp)
    if a.truth_out:
        truth = scene.stack.copy(values=scene.truth,
                                 reliability=np.zeros_like(scene.stack.reliability))
        with _staged(Path(a.truth_out)) as tmp:
            write_stack(truth, tmp)


def cmd_reference(a):
    ref = build_reference(read_stack(a.input))
    with _staged(Path(a.output)) as tmp:
        write_stack(ref, tmp)


def cmd_contaminate(a):
    ref = read_stack(a.reference)
    src = read_stack(a.mask_src)
    out = simulate_contamination(ref, src.reliability)
    out.pad = src.pad
    with _staged(Path(a.output)) as tmp:
        write_stack(out, tmp)


def _scenario_from_args(a) -> ScenarioSpec:
    if a.random_rate is not None:
        return ScenarioSpec(ScenarioKind.RANDOM, target_rate=a.random_rate, seed=a.seed)
    return ScenarioSpec(ScenarioKind.BLOCK, block=tuple(a.block), seed=a.seed)


def cmd_scenario(a):
    spec = _scenario_from_args(a)
    out = apply_scenario(read_stack(a.input), spec)
    with _staged(Path(a.output)) as tmp:
        write_stack(out, tmp)
        (tmp / SCENARIO_FILE).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def cmd_evaluate(a):
    truth = read_stack(a.truth)
    est = read_stack(a.estimate)
    if truth.ny == 1 and est.ny > 1:
        truth = tile_reference(truth, est.ny)
    if a.gaps_only:
        path = Path(a.gaps_only)
        if path.is_dir():
            path = path / SCENARIO_FILE
        spec = ScenarioSpec.from_dict(json.loads(path.read_text()))
        mask = gap_mask(truth, apply_scenario(truth, spec))
    else:
        mask = whole_series_mask(truth, est)
    mask[:, :, est.n_real:] = False
    report = evaluate_mae(truth, est, mask)
    sys.stdout.write(report.to_json() + "\n")


def cmd_sweep(a):
    base = read_stack(a.input)
    params = _pipeline_params(a)
    scenario = None
    if a.rates:
        sweep = random_rate_sweep(a.rates[0] / 100, a.rates[-1] / 100,
                                  (a.rates[1] - a.rates[0]) / 100 if len(a.rates) > 1 else 1.0,
                                  seed=a.seed)
    elif a.gap_lengths:
        sweep = block_sweep(base, a.gap_lengths, size=a.block_size, x=a.block_x,
                            y=a.block_y, t_start=a.block_start, seed=a.seed)
    else:
        sweep = a.patch_sizes
        scenario = ScenarioSpec(ScenarioKind.RANDOM, target_rate=a.rate / 100, seed=a.seed)
    rows = run_sweep(base, sweep, a.methods, params, scenario=scenario,
                     apply_filter=a.filter)
    with _staged(Path(a.out)) as tmp:
        tmp.write_text(sweep_csv(rows, timing=not a.no_timing), encoding="utf-8")


def cmd_filter_series(a):
    s = read_series_csv(a.input)
    y = prefill_linear(s.values, s.valid)
    noisy = s.flags != 0
    z = iterative_filter_batch(y[None, :], noisy[None, :], FilterParams(lam=a.lam))[0]
    sys.stdout.write("t,value\n")
    for t, v in enumerate(z):
        sys.stdout.write(f"{t},{float(v)!r}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensorfill", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="gap-fill and filter a stack")
    p.add_argument("input")
    p.add_argument("output")
    _add_solver_args(p)
    p.add_argument("--original-form", action="store_true",
                   help="complete the raw (m, m, T) patch instead of the rearranged tensor")
    p.add_argument("--no-filter", action="store_true", help="skip the trend-filter stage")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("synth", help="write a synthetic scene")
    p.add_argument("output")
    p.add_argument("--width", type=_bounded(int, 1), default=64)
    p.add_argument("--height", type=_bounded(int, 1), default=64)
    p.add_argument("--years", type=_bounded(int, 1), default=18)
    p.add_argument("--nd", type=_bounded(int, 2), default=23)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cloud-rate", type=_bounded(float, 0, 1), default=SynthConfig.cloud_rate)
    p.add_argument("--marginal-rate", type=_bounded(float, 0, 1), default=SynthConfig.marginal_rate)
    p.add_argument("--truth-out", help="also write the noise-free curves here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reference", help="build one-year reference curves")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("contaminate", help="apply a stack's reliability codes to a reference")
    p.add_argument("reference")
    p.add_argument("mask_src")
    p.add_argument("output")
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("scenario", help="inject random or block gaps")
    p.add_argument("input")
    p.add_argument("output")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--random-rate", type=_bounded(float, 0, 1, True, True))
    g.add_argument("--block", nargs=5, type=_bounded(int, 0), metavar=("X", "Y", "S", "T0", "LEN"))
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("evaluate", help="MAE report as JSON on stdout")
    p.add_argument("truth")
    p.add_argument("estimate")
    p.add_argument("--gaps-only", metavar="SCENARIO_JSON",
                   help="score only the gaps the scenario injected into TRUTH")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a scenario sweep and write a CSV")
    p.add_argument("input")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rates", type=_int_range, help="missing rates in percent, e.g. 25:80:5")
    g.add_argument("--gap-lengths", type=_int_range, help="block gap lengths, e.g. 2:12")
    g.add_argument("--patch-sizes", type=_int_list, help="e.g. 4,8,12,16,20")
    p.add_argument("--methods", type=_methods, default=_methods("tensor,linear"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=_bounded(float, 0, 100, True, True), default=40.0,
                   help="missing rate (percent) for patch-size sweeps")
    p.add_argument("--block-size", type=_bounded(int, 1))
    p.add_argument("--block-x", type=_bounded(int, 0))
    p.add_argument("--block-y", type=_bounded(int, 0))
    p.add_argument("--block-start", type=_bounded(int, 0))
    p.add_argument("--filter", action="store_true", help="score filtered output instead of the raw gap-fill")
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    _add_solver_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("filter-series", help="gap-fill and filter a t,value,ri CSV")
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", type=_bounded(float, 0), default=1.0)
    p.set_defaults(func=cmd_filter_series)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        a.func(a)
    except (TensorfillError, OSError, ValueError) as exc:
        print(f"tensorfill {a.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
