"""
Runtime and memory scaling of the Peak branch against naive self-attention.

Both modules are timed forward plus backward on synthetic inputs of every
requested length. Besides measured wall time the bench reports an analytic
multiply-add count, whose log-log slope is stable across machines.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from mssd.core.errors import ConfigurationError
from mssd.evalbench.protocols import AblationSwitches
from mssd.models.attention import NaiveSelfAttention
from mssd.models.sdnet import SDNetBranch, SDNetConfig
from mssd.numcore import AllocationTracker, GradTape, Tensor, backward, mean

logger = logging.getLogger(__name__)

CONV_BRANCH = "local_global_tcn"
ATTENTION = "self_attention"
BENCH_HORIZON = 24


@dataclass
class EfficiencyRow:
    length: int
    module: str
    wall_ms: float
    bytes: int
    flops: int
    output_checksum: float


@dataclass
class EfficiencyReport:
    rows: List[EfficiencyRow] = field(default_factory=list)
    wall_slopes: Dict[str, float] = field(default_factory=dict)
    flop_slopes: Dict[str, float] = field(default_factory=dict)

    def module_rows(self, module: str) -> List[EfficiencyRow]:
        return [row for row in self.rows if row.module == module]


def loglog_slope(lengths: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(values)`` against ``log(lengths)``."""
    x = np.log(np.asarray(lengths, dtype=np.float64))
    y = np.log(np.maximum(np.asarray(values, dtype=np.float64), 1e-12))
    return float(np.polyfit(x, y, 1)[0])


def analytic_flops(module: str, length: int, config: SDNetConfig, scale: int = 2) -> int:
    """Multiply-adds of one forward pass at sequence ``length``."""
    channels = config.tcn_channels
    if module == ATTENTION:
        return 3 * length * channels * channels + 2 * length * length * channels
    if module != CONV_BRANCH:
        raise ConfigurationError(f"unknown bench module {module!r}")
    compressed = math.ceil(length / scale)
    flops = channels * length
    flops += channels * channels * scale * compressed
    if config.global_block:
        rows = config.grid_rows
        padded = math.ceil(compressed / rows) * rows
        flops += channels * channels * config.global_kernel ** 2 * padded
    flops += config.tcn_layers * channels * channels * config.tcn_kernel * compressed
    flops += channels * compressed * BENCH_HORIZON
    return int(flops)


def _time_module(module, inputs: np.ndarray) -> tuple:
    with AllocationTracker() as tracker:
        started = time.perf_counter()
        with GradTape() as tape:
            out = module(Tensor(inputs))
            loss = mean(out)
            backward(loss, tape)
        wall_ms = (time.perf_counter() - started) * 1000.0
    return wall_ms, tracker.allocated_bytes, float(out.data.sum())


def efficiency_bench(
    lengths: Sequence[int],
    switches: AblationSwitches = AblationSwitches(attention_reference=True),
    config: SDNetConfig = None,
    seed: int = 0,
    repeats: int = 3,
) -> EfficiencyReport:
    """Time the Peak branch (and optionally naive attention) per input length.

    Wall time is the minimum over ``repeats`` runs; bytes come from the
    allocation tracker and do not vary between runs.
    """
    if list(lengths) != sorted(lengths) or len(set(lengths)) != len(lengths):
        raise ConfigurationError(f"bench lengths must be strictly ascending, got {list(lengths)}")
    config = switches.apply(config or SDNetConfig())
    config = config.model_copy(update={"dropout": 0.0})
    scale = config.kernel_scales[0]
    modules = [CONV_BRANCH] + ([ATTENTION] if switches.attention_reference else [])
    report = EfficiencyReport()

    for length in lengths:
        data_rng = np.random.default_rng(seed)
        series = data_rng.standard_normal((1, length))
        tokens = data_rng.standard_normal((1, config.tcn_channels, length))
        for name in modules:
            rng = np.random.default_rng(seed)
            if name == CONV_BRANCH:
                module = SDNetBranch(config, scale, length, BENCH_HORIZON, rng).eval()
                inputs = series
            else:
                module = NaiveSelfAttention(config.tcn_channels, rng).eval()
                inputs = tokens
            timings = [_time_module(module, inputs) for _ in range(max(repeats, 1))]
            wall_ms = min(t[0] for t in timings)
            _, nbytes, checksum = timings[0]
            report.rows.append(
                EfficiencyRow(
                    length=length,
                    module=name,
                    wall_ms=wall_ms,
                    bytes=nbytes,
                    flops=analytic_flops(name, length, config, scale),
                    output_checksum=checksum,
                )
            )
            logger.info(f"bench {name} L={length}: {wall_ms:.2f} ms, {nbytes} bytes")

    if len(lengths) >= 2:
        for name in modules:
            rows = report.module_rows(name)
            report.wall_slopes[name] = loglog_slope([r.length for r in rows], [r.wall_ms for r in rows])
            report.flop_slopes[name] = loglog_slope([r.length for r in rows], [r.flops for r in rows])
    return report
