"""Tests for daily phase labelling, decomposition and reassembly."""

import numpy as np
import pytest

from mssd.core.errors import ContractViolation
from mssd.decompose import (
    PHASES,
    Phase,
    decompose,
    extract_phase_windows,
    make_period_spec,
    phase_count,
    phase_labels,
    phase_positions,
    reassemble,
    reassembly_order,
)

pytestmark = pytest.mark.unit


def brute_force_label(t, offset, period):
    third = period // 3
    position = (t + offset) % period
    if position < third:
        return 0
    if position < 2 * third:
        return 1
    return 2


@pytest.fixture
def hourly():
    return make_period_spec(1)


class TestPeriodSpec:
    @pytest.mark.parametrize("samples_per_hour, period, phase_len", [(1, 24, 8), (4, 96, 32), (2, 48, 16)])
    def test_period_arithmetic(self, samples_per_hour, period, phase_len):
        spec = make_period_spec(samples_per_hour)
        assert spec.period_T == period
        assert spec.phase_len == phase_len

    @pytest.mark.parametrize("bad", [0, -1, 1.5])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(ContractViolation):
            make_period_spec(bad)


class TestDecompose:
    def test_one_day_thirds(self, hourly):
        decomp = decompose(np.arange(1, 25), hourly)
        assert list(np.flatnonzero(decomp.ascending)) == list(range(0, 8))
        assert list(np.flatnonzero(decomp.peak)) == list(range(8, 16))
        assert list(np.flatnonzero(decomp.descending)) == list(range(16, 24))

    def test_sum_of_components_is_input(self, hourly, rng):
        series = rng.standard_normal(100)
        decomp = decompose(series, hourly, phase_offset=5)
        np.testing.assert_array_equal(decomp.reconstruct(), series)

    def test_constant_series_splits_in_thirds(self, hourly):
        decomp = decompose(np.ones(24 * 5), hourly)
        for phase in PHASES:
            assert decomp.component(phase).sum() == 40

    def test_labels_match_brute_force(self, rng):
        for samples_per_hour in (1, 2, 4):
            spec = make_period_spec(samples_per_hour)
            for _ in range(20):
                length = int(rng.integers(1, 5 * spec.period_T))
                offset = int(rng.integers(0, spec.period_T))
                expected = [brute_force_label(t, offset, spec.period_T) for t in range(length)]
                assert list(phase_labels(length, spec, offset)) == expected

    def test_reconstruction_is_exact_for_many_series(self, rng):
        """Masking copies values, so the identity holds bitwise."""
        for _ in range(1000):
            samples_per_hour = int(rng.choice([1, 2, 4]))
            spec = make_period_spec(samples_per_hour)
            length = int(rng.integers(1, 300))
            offset = int(rng.integers(0, spec.period_T))
            series = rng.standard_normal(length) * 10 ** rng.uniform(-3, 3)
            decomp = decompose(series, spec, offset)
            np.testing.assert_array_equal(decomp.reconstruct(), series)
            assert len(decomp) == length

    def test_labels_property(self, hourly):
        decomp = decompose(np.zeros(3), hourly, phase_offset=7)
        assert decomp.labels == [Phase.ASCENDING, Phase.PEAK, Phase.PEAK]

    def test_offset_out_of_range(self, hourly):
        with pytest.raises(ContractViolation):
            decompose(np.ones(5), hourly, phase_offset=24)

    def test_empty_series(self, hourly):
        with pytest.raises(ContractViolation):
            decompose([], hourly)


class TestExtractPhaseWindows:
    def test_two_days_of_peak(self, hourly):
        segments = extract_phase_windows(decompose(np.arange(48.0), hourly), Phase.PEAK)
        assert [list(s) for s in segments] == [list(range(8, 16)), list(range(32, 40))]

    def test_trailing_positions_outside_phase(self, hourly):
        segments = extract_phase_windows(decompose(np.arange(30.0), hourly), Phase.DESCENDING)
        assert [list(s) for s in segments] == [list(range(16, 24))]

    def test_empty_before_phase_starts(self, hourly):
        assert extract_phase_windows(decompose(np.ones(4), hourly), Phase.DESCENDING) == []

    def test_segments_concatenate_to_phase_values(self, hourly, rng):
        series = rng.standard_normal(70)
        decomp = decompose(series, hourly, phase_offset=3)
        for phase in PHASES:
            segments = extract_phase_windows(decomp, phase)
            joined = np.concatenate(segments) if segments else np.array([])
            expected = series[phase_positions(70, hourly, 3, phase)]
            np.testing.assert_array_equal(joined, expected)
            assert all(len(s) <= hourly.phase_len for s in segments)


class TestReassemble:
    def test_masked_inputs(self, hourly):
        y_u = np.where(np.arange(24) < 8, 1.0, 0.0)
        y_p = np.where((np.arange(24) >= 8) & (np.arange(24) < 16), 2.0, 0.0)
        y_d = np.where(np.arange(24) >= 16, 3.0, 0.0)
        out = reassemble(y_u, y_p, y_d, 24, hourly)
        np.testing.assert_array_equal(out, [1.0] * 8 + [2.0] * 8 + [3.0] * 8)

    def test_compact_inputs(self, hourly):
        out = reassemble(np.ones(8), np.full(8, 2.0), np.full(8, 3.0), 24, hourly)
        np.testing.assert_array_equal(out, [1.0] * 8 + [2.0] * 8 + [3.0] * 8)

    def test_round_trip_of_decomposition(self, hourly, rng):
        for _ in range(50):
            horizon = int(rng.integers(1, 100))
            offset = int(rng.integers(0, 24))
            series = rng.standard_normal(horizon)
            decomp = decompose(series, hourly, offset)
            out = reassemble(decomp.ascending, decomp.peak, decomp.descending, horizon, hourly, offset)
            np.testing.assert_array_equal(out, series)

    def test_offset_routing(self, hourly):
        horizon, offset = 36, 12
        counts = {phase: phase_count(horizon, hourly, offset, phase) for phase in PHASES}
        out = reassemble(
            np.full(counts[Phase.ASCENDING], 1.0),
            np.full(counts[Phase.PEAK], 2.0),
            np.full(counts[Phase.DESCENDING], 3.0),
            horizon,
            hourly,
            start_offset=offset,
        )
        expected = [1.0 + brute_force_label(t, offset, 24) for t in range(horizon)]
        np.testing.assert_array_equal(out, expected)
        assert list(out) == [2.0] * 4 + [3.0] * 8 + [1.0] * 8 + [2.0] * 8 + [3.0] * 8

    def test_length_mismatch(self, hourly):
        with pytest.raises(ContractViolation):
            reassemble(np.ones(7), np.ones(8), np.ones(8), 24, hourly)

    def test_reassembly_order_inverts_phase_grouping(self, hourly, rng):
        series = rng.standard_normal(50)
        grouped = np.concatenate([series[phase_positions(50, hourly, 9, p)] for p in PHASES])
        np.testing.assert_array_equal(grouped[reassembly_order(50, hourly, 9)], series)
