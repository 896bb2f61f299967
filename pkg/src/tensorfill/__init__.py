"""Gap-filling and denoising of gridded vegetation-index time series."""
from .completion import CompletionParams, WeightVector, complete, complete_patch, update_weights
from .evaluation import (
    EvalReport,
    ScenarioKind,
    ScenarioSpec,
    apply_scenario,
    build_reference,
    evaluate_mae,
    run_sweep,
    simulate_contamination,
)
from .grid import RI, Patch, RearrangedTensor, Stack, fold, inverse_rearrange, rearrange, unfold
from .io import read_series_csv, read_stack, write_stack
from .pipeline import Method, PipelineParams, reconstruct_scene
from .synthetic import SynthConfig, synthesize
from .trend import FilterParams, Series, iterative_filter, l1_trend_filter

__version__ = "0.1.0"
