"""
CSV, aligned-table and SVG outputs for benchmark results.
"""

from __future__ import annotations

import logging
from dataclasses import asdict
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from mssd.decompose import PhaseDecomposition  # noqa: E402
from mssd.evalbench.efficiency import EfficiencyReport  # noqa: E402
from mssd.evalbench.protocols import AblationResult, EvalReport  # noqa: E402

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "dataset", "input_len", "horizon", "variant", "n_variables",
    "mse", "mae", "n_windows", "wall_ms", "peak_mem_bytes",
]
PathLike = Union[str, Path]


def reports_to_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """One row per (dataset, I, O, variant)."""
    return pd.DataFrame([r.model_dump() for r in reports], columns=REPORT_COLUMNS)


def robustness_to_frame(results: Sequence[Tuple[float, EvalReport]]) -> pd.DataFrame:
    df = reports_to_frame([report for _, report in results])
    df.insert(0, "noise_ratio", [ratio for ratio, _ in results])
    return df


def ablation_to_frame(results: Sequence[AblationResult]) -> pd.DataFrame:
    rows = []
    for result in results:
        for report, parameters in ((result.default, result.default_parameters), (result.variant, result.variant_parameters)):
            row = report.model_dump()
            row["parameters"] = parameters
            rows.append(row)
    return pd.DataFrame(rows, columns=REPORT_COLUMNS + ["parameters"])


def efficiency_to_frame(report: EfficiencyReport) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in report.rows])


def write_csv(df: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.6g")
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def format_table(df: pd.DataFrame) -> str:
    """Human-readable aligned table."""
    return df.to_string(index=False, float_format=lambda v: f"{v:.4f}")


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path


def plot_metric_vs_horizon(reports: Sequence[EvalReport], path: PathLike, metric: str = "mse") -> Path:
    df = reports_to_frame(reports).sort_values("horizon")
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, group in df.groupby("variant", sort=True):
        ax.plot(group["horizon"], group[metric], marker="o", label=str(variant))
    ax.set_xlabel("horizon O")
    ax.set_ylabel(metric.upper())
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_runtime_vs_length(report: EfficiencyReport, path: PathLike) -> Path:
    df = efficiency_to_frame(report)
    fig, ax = plt.subplots(figsize=(6, 4))
    for module, group in df.groupby("module", sort=True):
        slope = report.wall_slopes.get(module)
        label = f"{module} (slope {slope:.2f})" if slope is not None else str(module)
        ax.loglog(group["length"], group["wall_ms"], marker="o", label=label)
    ax.set_xlabel("input length")
    ax.set_ylabel("forward+backward ms")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_decomposition(series: np.ndarray, decomp: PhaseDecomposition, path: PathLike, max_points: int = 24 * 7 * 4) -> Path:
    """Series and its three phase components in stacked panels."""
    n = min(len(decomp), max_points)
    t = np.arange(n)
    panels: List[Tuple[str, np.ndarray]] = [
        ("series", np.asarray(series)[:n]),
        ("ascending", decomp.ascending[:n]),
        ("peak", decomp.peak[:n]),
        ("descending", decomp.descending[:n]),
    ]
    fig, axes = plt.subplots(len(panels), 1, figsize=(9, 7), sharex=True)
    for ax, (title, values) in zip(axes, panels):
        ax.plot(t, values, linewidth=0.8)
        ax.set_ylabel(title)
    axes[-1].set_xlabel("sample")
    return _save(fig, path)
