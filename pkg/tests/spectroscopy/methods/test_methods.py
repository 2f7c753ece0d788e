from __future__ import annotations

import numpy as np
import pytest

from src.spectroscopy.methods import (
    CompressedRademacherMethod,
    CompressedTgvMethod,
    CpmgNnlsMethod,
    build_method_registry,
)
from src.spectroscopy.services.control import (
    CpmgSequence,
    FourierBasis,
    FourierEnsemble,
    RademacherSequence,
)
from src.spectroscopy.services.forward import build_measurement_matrix, simulate_record
from src.spectroscopy.services.reconstruction import ReconstructionService
from src.spectroscopy.services.spectra import (
    FrequencyGrid,
    default_quantum_dot_params,
    l2_error,
    make_quantum_dot_surrogate,
    make_sparse_spectrum,
)
from src.spectroscopy.services.trials import run_scenario


def test_registry_holds_every_method() -> None:
    assert build_method_registry().names() == ["CPMG", "CS_R", "CS_R+TGV", "CS_TGV"]


def test_rademacher_designs_nest_across_counts() -> None:
    grid = FrequencyGrid.band(40)
    method = CompressedRademacherMethod()

    small = method.build_sequences(grid, 4, seed=9, params={})
    large = method.build_sequences(grid, 10, seed=9, params={})

    assert all(isinstance(seq, RademacherSequence) for seq in large)
    for first, second in zip(small, large):
        assert np.array_equal(first.signs, second.signs)


def test_rademacher_design_honours_bias() -> None:
    grid = FrequencyGrid.band(200)

    sequences = CompressedRademacherMethod().build_sequences(grid, 20, seed=1, params={"p": 1.0})

    assert all(np.all(seq.signs == 1) for seq in sequences)


@pytest.mark.parametrize(("mode", "kind"), [("ideal", FourierBasis), ("ensemble", FourierEnsemble)])
def test_fourier_design_modes(mode: str, kind: type) -> None:
    grid = FrequencyGrid.band(30)

    sequences = CompressedTgvMethod().build_sequences(
        grid, 8, seed=2, params={"fourier_mode": mode, "n_realizations": 10}
    )

    assert len(sequences) == 8
    assert all(isinstance(seq, kind) for seq in sequences)
    assert len({seq.j_index for seq in sequences}) == 8


def test_cpmg_design_is_band_scan() -> None:
    grid = FrequencyGrid.band(20)
    method = CpmgNnlsMethod()

    assert method.build_sequences(grid, 0, seed=0, params={}) == []
    sequences = method.build_sequences(grid, 5, seed=0, params={})
    assert [seq.n_pulses for seq in sequences] == [1, 2, 3, 4, 5]
    assert all(isinstance(seq, CpmgSequence) for seq in sequences)


def test_cpmg_ideal_design_recovers_delta_forward_model() -> None:
    grid = FrequencyGrid.band(20)
    truth = make_quantum_dot_surrogate(default_quantum_dot_params(grid), grid)
    method = CpmgNnlsMethod()
    sequences = method.build_sequences(grid, 20, seed=0, params={})
    matrix = build_measurement_matrix(sequences, grid, cpmg_ideal=True)
    record = simulate_record(matrix, truth)

    result = method.reconstruct(matrix, record, {"ideal_design": True})

    assert np.allclose(result.spectrum_estimate, truth.values, atol=1e-8)


def test_rademacher_l1_recovers_sparse_spectrum_without_noise() -> None:
    grid = FrequencyGrid.band(60)
    truth = make_sparse_spectrum(60, 2, seed=4, grid=grid)

    outcome = run_scenario(
        ReconstructionService(build_method_registry()),
        "CS_R",
        truth,
        count=30,
        sequence_seed=1,
        shot_seed=2,
        method_params={"tol": 1e-8, "max_iter": 20_000},
    )

    assert l2_error(outcome.estimate, truth.values, relative=True) < 0.3


def test_combined_method_cross_validates_weight_pair() -> None:
    grid = FrequencyGrid.band(30)
    truth = make_sparse_spectrum(30, 2, seed=1, grid=grid)
    registry = build_method_registry()
    method = registry.get("CS_R+TGV")
    sequences = method.build_sequences(grid, 15, seed=3, params={})
    matrix = build_measurement_matrix(sequences, grid)
    record = simulate_record(matrix, truth)

    result = method.reconstruct(
        matrix, record, {"cross_validate": True, "folds": 3, "max_iter": 200}
    )

    assert result.lambda_used["lambda1"] > 0
    assert result.lambda_used["lambda2"] > 0
