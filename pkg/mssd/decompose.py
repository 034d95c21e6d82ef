"""
Daily phase decomposition.

A day of ``T = 24 * samples_per_hour`` positions is cut into three equal
clock thirds: Ascending (U), Peak (P) and Descending (D). A series is
decomposed into three full-length masked copies whose elementwise sum is the
series itself, and forecasts are reassembled from per-phase predictions by
the same labelling rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Sequence

import numpy as np

from mssd.core.errors import ContractViolation

logger = logging.getLogger(__name__)


class Phase(str, Enum):
    """Phase labels in clock order."""
    ASCENDING = "U"
    PEAK = "P"
    DESCENDING = "D"

    @property
    def code(self) -> int:
        return PHASES.index(self)


PHASES = (Phase.ASCENDING, Phase.PEAK, Phase.DESCENDING)


@dataclass(frozen=True)
class PeriodSpec:
    samples_per_hour: int
    period_T: int
    phase_len: int


def make_period_spec(samples_per_hour: int) -> PeriodSpec:
    """Period of one day at ``samples_per_hour`` samples per hour."""
    if int(samples_per_hour) != samples_per_hour or samples_per_hour < 1:
        raise ContractViolation(f"samples_per_hour must be a positive integer, got {samples_per_hour}")
    period = 24 * int(samples_per_hour)
    return PeriodSpec(samples_per_hour=int(samples_per_hour), period_T=period, phase_len=period // 3)


def _check_offset(spec: PeriodSpec, offset: int) -> None:
    if not 0 <= offset < spec.period_T:
        raise ContractViolation(f"phase offset must lie in [0, {spec.period_T}), got {offset}")


@lru_cache(maxsize=1024)
def _label_codes(length: int, period: int, phase_len: int, offset: int) -> np.ndarray:
    codes = (((np.arange(length) + offset) % period) // phase_len).astype(np.int8)
    codes.flags.writeable = False
    return codes


def phase_labels(length: int, spec: PeriodSpec, offset: int = 0) -> np.ndarray:
    """Label code (0=U, 1=P, 2=D) of every position of a series starting at ``offset``."""
    _check_offset(spec, offset)
    return _label_codes(int(length), spec.period_T, spec.phase_len, int(offset))


@lru_cache(maxsize=4096)
def _positions(length: int, period: int, phase_len: int, offset: int, code: int) -> np.ndarray:
    positions = np.flatnonzero(_label_codes(length, period, phase_len, offset) == code)
    positions.flags.writeable = False
    return positions


def phase_positions(length: int, spec: PeriodSpec, offset: int, phase: Phase) -> np.ndarray:
    """Ascending indices of the positions carrying ``phase``."""
    _check_offset(spec, offset)
    return _positions(int(length), spec.period_T, spec.phase_len, int(offset), Phase(phase).code)


def phase_count(length: int, spec: PeriodSpec, offset: int, phase: Phase) -> int:
    return int(phase_positions(length, spec, offset, phase).size)


@lru_cache(maxsize=1024)
def _reassembly_order(length: int, period: int, phase_len: int, offset: int) -> np.ndarray:
    blocks = np.concatenate(
        [_positions(length, period, phase_len, offset, code) for code in range(3)]
    )
    order = np.empty(length, dtype=np.int64)
    order[blocks] = np.arange(length)
    order.flags.writeable = False
    return order


def reassembly_order(length: int, spec: PeriodSpec, offset: int) -> np.ndarray:
    """Index into the concatenation ``[U values, P values, D values]`` for every position.

    ``concat(y_u, y_p, y_d)[reassembly_order(...)]`` is the time-ordered series.
    """
    _check_offset(spec, offset)
    return _reassembly_order(int(length), spec.period_T, spec.phase_len, int(offset))


@dataclass(frozen=True)
class PhaseDecomposition:
    """Masked phase components of a series.

    Each component equals the series at its own phase positions and zero
    elsewhere, so ``ascending + peak + descending`` is the series.
    """
    ascending: np.ndarray
    peak: np.ndarray
    descending: np.ndarray
    phase_index: np.ndarray
    spec: PeriodSpec
    phase_offset: int

    def component(self, phase: Phase) -> np.ndarray:
        return {
            Phase.ASCENDING: self.ascending,
            Phase.PEAK: self.peak,
            Phase.DESCENDING: self.descending,
        }[Phase(phase)]

    @property
    def labels(self) -> List[Phase]:
        return [PHASES[code] for code in self.phase_index]

    def reconstruct(self) -> np.ndarray:
        return self.ascending + self.peak + self.descending

    def __len__(self) -> int:
        return int(self.phase_index.size)


def decompose(series: Sequence[float], spec: PeriodSpec, phase_offset: int = 0) -> PhaseDecomposition:
    """Split ``series`` into masked Ascending/Peak/Descending components.

    Args:
        series: Values of a univariate series, any length >= 1.
        spec: Period definition.
        phase_offset: Position of ``series[0]`` within the daily cycle.
    """
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ContractViolation(f"decompose needs a non-empty 1-D series, got shape {values.shape}")
    codes = phase_labels(values.size, spec, phase_offset)
    components: Dict[int, np.ndarray] = {}
    for code in range(3):
        component = np.zeros_like(values)
        mask = codes == code
        component[mask] = values[mask]
        component.flags.writeable = False
        components[code] = component
    return PhaseDecomposition(
        ascending=components[0],
        peak=components[1],
        descending=components[2],
        phase_index=codes,
        spec=spec,
        phase_offset=int(phase_offset),
    )


def extract_phase_windows(decomp: PhaseDecomposition, phase: Phase) -> List[np.ndarray]:
    """Contiguous runs of one phase, in time order.

    Runs never cross a period boundary, so each full period contributes one
    segment of ``phase_len`` values; a series cut mid-phase contributes a
    shorter leading or trailing segment.
    """
    code = Phase(phase).code
    positions = np.flatnonzero(decomp.phase_index == code)
    if positions.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(positions) > 1) + 1
    values = decomp.component(phase)
    return [values[run].copy() for run in np.split(positions, breaks)]


def _phase_values(name: str, values: np.ndarray, positions: np.ndarray, horizon: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == horizon and positions.size != horizon:
        return values[positions]
    if values.size == positions.size:
        return values
    raise ContractViolation(
        f"{name} has {values.size} values; expected {positions.size} phase values "
        f"or a masked series of length {horizon}"
    )


def reassemble(
    y_u: Sequence[float],
    y_p: Sequence[float],
    y_d: Sequence[float],
    horizon: int,
    spec: PeriodSpec,
    start_offset: int = 0,
) -> np.ndarray:
    """Merge per-phase predictions into one forecast of length ``horizon``.

    Each prediction is either the compact list of its phase values in time
    order or a masked series of length ``horizon``.
    """
    if horizon < 1:
        raise ContractViolation(f"horizon must be >= 1, got {horizon}")
    parts = []
    for name, values, phase in (("y_u", y_u, Phase.ASCENDING), ("y_p", y_p, Phase.PEAK), ("y_d", y_d, Phase.DESCENDING)):
        positions = phase_positions(horizon, spec, start_offset, phase)
        parts.append(_phase_values(name, values, positions, horizon))
    return np.concatenate(parts)[reassembly_order(horizon, spec, start_offset)]
