"""Metrics, baselines, benchmark protocols and reports."""

from mssd.evalbench.baselines import GlobalLinear, SeasonalNaive, fit_global_linear
from mssd.evalbench.efficiency import EfficiencyReport, analytic_flops, efficiency_bench, loglog_slope
from mssd.evalbench.metrics import mae, mse
from mssd.evalbench.protocols import (
    AblationResult,
    AblationSwitches,
    EvalReport,
    NoiseSpec,
    ablation_run,
    ablation_study,
    evaluate,
    evaluate_multivariate,
    inject_noise,
    input_length_sweep,
    robustness_sweep,
)

__all__ = [
    "AblationResult",
    "AblationSwitches",
    "EfficiencyReport",
    "EvalReport",
    "GlobalLinear",
    "NoiseSpec",
    "SeasonalNaive",
    "ablation_run",
    "ablation_study",
    "analytic_flops",
    "efficiency_bench",
    "evaluate",
    "evaluate_multivariate",
    "fit_global_linear",
    "inject_noise",
    "input_length_sweep",
    "loglog_slope",
    "mae",
    "mse",
    "robustness_sweep",
]
