from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from src.data_types.spectroscopy import GridMode
from src.spectroscopy.services.spectra import (
    FrequencyGrid,
    QdSurrogateParams,
    Spectrum,
    default_quantum_dot_params,
    integrate_curvature,
    integration_operator,
    l2_error,
    make_piecewise_linear_spectrum,
    make_quantum_dot_surrogate,
    make_sparse_spectrum,
    ou_spectrum,
    second_difference,
    second_difference_matrix,
    spectrum_from_frame,
    support,
    write_spectrum_csv,
)


def test_band_grid_spans_zero_to_nyquist() -> None:
    grid = FrequencyGrid.band(50, tau=0.5)

    assert grid.omega.shape == (50,)
    assert grid.omega[0] > 0
    assert grid.omega[-1] == pytest.approx(math.pi / 0.5)
    assert grid.delta_omega == pytest.approx(math.pi / (0.5 * 50))
    assert grid.m_segments == 50


def test_band_grid_rejects_cutoff_above_nyquist() -> None:
    with pytest.raises(ValueError, match="omega_c"):
        FrequencyGrid.band(10, tau=1.0, omega_c=4.0)


def test_circulant_grid_requires_one_point_per_segment() -> None:
    with pytest.raises(ValueError, match="circulant"):
        FrequencyGrid(
            n_points=5, tau=1.0, omega_c=2 * math.pi, m_segments=6, mode=GridMode.CIRCULANT
        )


def test_grid_dict_round_trip() -> None:
    grid = FrequencyGrid.circulant(16, tau=0.25)

    assert FrequencyGrid.from_dict(grid.to_dict()) == grid
    assert grid.omega[-1] == pytest.approx(2 * math.pi / 0.25)


def test_spectrum_rejects_negative_values_and_is_read_only() -> None:
    grid = FrequencyGrid.band(4)

    with pytest.raises(ValueError, match="nonnegative"):
        Spectrum(grid, np.array([0.1, -0.2, 0.0, 0.3]))

    spectrum = Spectrum(grid, np.ones(4))
    with pytest.raises(ValueError):
        spectrum.values[0] = 2.0


def test_sparse_spectrum_has_requested_support_and_norm() -> None:
    spectrum = make_sparse_spectrum(100, 4, seed=11, norm=2.0)

    assert support(spectrum).size == 4
    assert np.linalg.norm(spectrum.values) == pytest.approx(2.0)
    nonzero = spectrum.values[support(spectrum)]
    assert nonzero.max() / nonzero.min() <= 5.0 + 1e-12


def test_sparse_spectrum_is_deterministic_per_seed() -> None:
    first = make_sparse_spectrum(60, 3, seed=5)
    second = make_sparse_spectrum(60, 3, seed=5)
    other = make_sparse_spectrum(60, 3, seed=6)

    assert np.array_equal(first.values, second.values)
    assert not np.array_equal(first.values, other.values)


def test_sparse_spectrum_rejects_sparsity_above_grid_size() -> None:
    with pytest.raises(ValueError, match="sparsity"):
        make_sparse_spectrum(10, 11, seed=0)


@pytest.mark.parametrize("kinks", [1, 4, 7])
def test_piecewise_linear_spectrum_curvature_is_kink_sparse(kinks: int) -> None:
    spectrum = make_piecewise_linear_spectrum(100, kinks, seed=3)

    curvature = second_difference(spectrum)
    assert len(curvature) == 98
    assert support(curvature).size == kinks
    assert spectrum.values.min() == 0.0
    assert np.linalg.norm(spectrum.values) == pytest.approx(1.0)


def test_second_difference_matrix_matches_diff() -> None:
    values = np.random.default_rng(0).random(9)

    assert np.allclose(second_difference_matrix(9) @ values, np.diff(values, n=2))


def test_integrate_curvature_recovers_spectrum_with_its_anchors() -> None:
    spectrum = make_piecewise_linear_spectrum(100, 4, seed=8)
    values = spectrum.values

    rebuilt = integrate_curvature(second_difference(spectrum), (values[0], values[-1]))

    assert np.allclose(rebuilt, values, rtol=0, atol=1e-10)


def test_integration_operator_matches_integrate_curvature() -> None:
    delta = np.random.default_rng(2).standard_normal(10)
    operator, offset = integration_operator(12, boundary=(0.5, -1.0))

    assert np.allclose(operator @ delta + offset, integrate_curvature(delta, (0.5, -1.0)))


def test_quantum_dot_surrogate_peaks_at_first_resonance() -> None:
    grid = FrequencyGrid.band(200)
    spectrum = make_quantum_dot_surrogate(default_quantum_dot_params(grid), grid)

    assert spectrum.values.max() == pytest.approx(1.0)
    peak = grid.omega[np.argmax(spectrum.values)]
    assert abs(peak - 0.25 * grid.omega_c) <= grid.delta_omega


def test_quantum_dot_params_need_matching_lengths() -> None:
    with pytest.raises(ValueError, match="equal length"):
        QdSurrogateParams(peak_centers=(1.0, 2.0), peak_widths=(0.1,), peak_heights=(1.0,))


def test_ou_spectrum_low_frequency_limit() -> None:
    value = ou_spectrum(np.array([0.0]), variance=0.3, correlation_time=2.0)

    assert value[0] == pytest.approx(4 * 0.3 * 2.0 / math.pi)


def test_relative_l2_error() -> None:
    truth = np.array([3.0, 4.0])

    assert l2_error(np.array([3.0, 0.0]), truth, relative=True) == pytest.approx(0.8)
    with pytest.raises(ValueError, match="all-zero"):
        l2_error(truth, np.zeros(2), relative=True)


def test_spectrum_csv_round_trip_is_exact(tmp_path) -> None:
    spectrum = make_sparse_spectrum(30, 3, seed=1)
    path = tmp_path / "spectrum.csv"

    write_spectrum_csv(spectrum, path, config_hash="abc")
    loaded = spectrum_from_frame(pd.read_csv(path, float_precision="round_trip"), spectrum.grid)

    assert np.array_equal(loaded.values, spectrum.values)
