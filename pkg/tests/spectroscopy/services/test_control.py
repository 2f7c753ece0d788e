from __future__ import annotations

import math

import numpy as np
import pytest

from src.spectroscopy.services.control import (
    CpmgSequence,
    FourierEnsemble,
    RademacherSequence,
    SwitchingFunction,
    count_sign_changes,
    cpmg_filter,
    cpmg_sequences_for_band,
    expected_pulse_count,
    expected_sign_changes,
    fourier_ensemble_realizations,
    fourier_ensemble_signs,
    fourier_filter_ideal,
    pulse_times,
    rademacher_filter,
    sample_fourier_indices,
    sample_rademacher,
    segment_envelope,
    sequence_from_dict,
    switching_function,
)
from src.spectroscopy.services.experiments import empirical_pulse_count
from src.spectroscopy.services.spectra import FrequencyGrid


def test_sample_rademacher_is_deterministic_and_signed() -> None:
    first = sample_rademacher(64, 0.5, seed=3)
    second = sample_rademacher(64, 0.5, seed=3)

    assert np.array_equal(first.signs, second.signs)
    assert set(np.unique(first.signs)) <= {-1, 1}


def test_fully_biased_sequence_has_no_pulses() -> None:
    seq = sample_rademacher(30, 1.0, seed=0)

    assert np.all(seq.signs == 1)
    assert pulse_times(seq) == []


def test_pulse_times_mark_sign_changes() -> None:
    assert pulse_times(np.array([1, 1, -1, -1, 1])) == [2, 4]
    assert count_sign_changes(np.array([[1, -1, 1], [1, 1, 1]])).tolist() == [2, 0]


def test_cyclic_count_adds_wrap_around_boundary() -> None:
    signs = np.array([[1, -1, 1, 1, -1], [1, 1, 1, 1, 1], [-1, 1, 1, 1, 1]])

    assert count_sign_changes(signs, cyclic=True).tolist() == [4, 0, 2]
    assert count_sign_changes(signs).tolist() == [3, 0, 1]


def test_rademacher_signs_must_be_unit() -> None:
    with pytest.raises(ValueError, match="signs"):
        RademacherSequence(m_segments=3, p=0.5, seed=None, signs=np.array([1, 0, -1]))


@pytest.mark.parametrize(("p", "expected"), [(0.5, 100.0), (0.1, 36.0), (0.05, 19.0)])
def test_empirical_pulse_count_matches_expectation(p: float, expected: float) -> None:
    mean, stderr = empirical_pulse_count(200, p, n_seeds=10_000, seed=7)

    assert expected_pulse_count(200, p) == pytest.approx(expected)
    assert abs(mean - expected) <= 3 * stderr


@pytest.mark.parametrize("p", [0.5, 0.1, 0.05])
def test_single_shot_pulse_count_skips_endpoints(p: float) -> None:
    mean, stderr = empirical_pulse_count(200, p, n_seeds=10_000, seed=8, cyclic=False)

    # only the M-1 interior boundaries can carry a pulse
    assert abs(mean - expected_sign_changes(200, p)) <= 4 * stderr


def test_rademacher_filter_matches_switching_function_filter() -> None:
    grid = FrequencyGrid.band(40, tau=0.5)
    seq = sample_rademacher(40, 0.5, seed=12)

    direct = rademacher_filter(seq, grid)
    exact = switching_function(seq, tau=grid.tau).filter(grid.omega)

    assert np.allclose(direct, exact, rtol=1e-9, atol=1e-9)


def test_switching_filter_at_zero_frequency_is_squared_area() -> None:
    free = SwitchingFunction(total_time=2.0, flip_times=np.array([]))
    echo = SwitchingFunction(total_time=2.0, flip_times=np.array([0.5]))

    assert free.filter(np.array([0.0]))[0] == pytest.approx(4.0)
    assert echo.filter(np.array([0.0]))[0] == pytest.approx(1.0)


def test_time_reversal_preserves_filter() -> None:
    switching = SwitchingFunction(
        total_time=3.0, flip_times=np.array([0.4, 1.7, 2.2]), initial_sign=-1
    )
    omega = np.linspace(0.1, 10.0, 25)

    assert np.allclose(switching.reversed().filter(omega), switching.filter(omega))


def test_ideal_fourier_row_rejects_out_of_range_index() -> None:
    grid = FrequencyGrid.band(10)

    assert np.allclose(fourier_filter_ideal(0, grid), 1.0)
    with pytest.raises(ValueError, match="j must be"):
        fourier_filter_ideal(11, grid)


def test_fourier_indices_are_distinct_and_nested() -> None:
    small = sample_fourier_indices(5, 20, seed=4)
    large = sample_fourier_indices(12, 20, seed=4)

    assert large[:5] == small
    assert len(set(large)) == 12
    assert all(0 <= j <= 20 for j in large)


def test_fourier_ensemble_correlates_only_at_lag_zero_and_j() -> None:
    ens = FourierEnsemble(j_index=3, m_segments=40, n_realizations=4000, seed=2)
    signs = fourier_ensemble_signs(ens).astype(float)

    def lag_correlation(lag: int) -> float:
        return float(np.mean(signs[:, :-lag] * signs[:, lag:]))

    assert lag_correlation(3) == pytest.approx(0.5, abs=0.05)
    assert lag_correlation(1) == pytest.approx(0.0, abs=0.05)
    assert lag_correlation(6) == pytest.approx(0.0, abs=0.05)


def test_fourier_ensemble_realizations_average_their_rows() -> None:
    grid = FrequencyGrid.band(16)
    ens = FourierEnsemble(j_index=2, m_segments=16, n_realizations=30, seed=1)

    realizations = fourier_ensemble_realizations(ens, grid)

    assert realizations.rows.shape == (30, 16)
    assert np.allclose(realizations.mean_row, realizations.rows.mean(axis=0))
    assert np.all(realizations.rows >= 0)


def test_cpmg_flip_times_are_centred() -> None:
    seq = CpmgSequence(n_pulses=2, total_time=4.0)

    assert seq.flip_times.tolist() == [1.0, 3.0]


def test_cpmg_band_tiling_places_peaks_on_grid() -> None:
    grid = FrequencyGrid.band(30)
    sequences = cpmg_sequences_for_band(30, grid.omega_c)

    for seq in sequences[:10]:
        row = cpmg_filter(seq, grid)
        assert abs(int(np.argmax(row)) - (seq.n_pulses - 1)) <= 1

        ideal = cpmg_filter(seq, grid, ideal=True)
        assert np.flatnonzero(ideal).tolist() == [seq.n_pulses - 1]
        assert ideal.sum() == pytest.approx(row.sum())


def test_cpmg_band_tiling_total_time() -> None:
    sequences = cpmg_sequences_for_band(4, omega_c=math.pi)

    assert [seq.n_pulses for seq in sequences] == [1, 2, 3, 4]
    assert all(seq.total_time == pytest.approx(4.0) for seq in sequences)


def test_sequence_from_dict_restores_signs() -> None:
    seq = sample_rademacher(12, 0.3, seed=9)

    restored = sequence_from_dict(seq.to_dict(include_signs=True))

    assert np.array_equal(restored.signs, seq.signs)
    assert restored.p == 0.3


def test_rademacher_filter_ignores_global_sign_flip() -> None:
    grid = FrequencyGrid.band(50)
    seq = sample_rademacher(50, 0.5, seed=31)

    assert np.allclose(rademacher_filter(-seq.signs, grid), rademacher_filter(seq, grid))


def test_rademacher_filter_is_even_in_frequency() -> None:
    seq = sample_rademacher(24, 0.5, seed=5)
    switching = switching_function(seq, tau=1.0)
    omega = np.linspace(0.05, math.pi, 40)

    assert np.allclose(switching.filter(-omega), switching.filter(omega))


def test_fourier_ensemble_mean_follows_ideal_cosine_row() -> None:
    grid = FrequencyGrid.band(100)
    ens = FourierEnsemble(j_index=5, m_segments=100, n_realizations=2000, seed=0)

    mean_row = fourier_ensemble_realizations(ens, grid).mean_row
    # the ideal row leaves out the single-segment envelope
    flattened = mean_row / segment_envelope(grid)

    r = np.corrcoef(flattened, fourier_filter_ideal(5, grid))[0, 1]
    assert r >= 0.95


def test_spin_echo_peak_sits_at_pi_over_total_time() -> None:
    grid = FrequencyGrid.band(40)
    echo = cpmg_sequences_for_band(40, grid.omega_c)[0]

    row = cpmg_filter(echo, grid)

    assert echo.n_pulses == 1
    peak = grid.omega[int(np.argmax(row))]
    assert abs(peak - math.pi / echo.total_time) <= grid.delta_omega * (1 + 1e-9)
