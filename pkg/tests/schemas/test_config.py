from __future__ import annotations

import tomllib
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.core.config import settings
from src.data_types.spectroscopy import MethodName, SpectrumFamily, SweepKind
from src.schemas import ExperimentConfig, MeasurementBundleFile


def test_defaults_describe_a_noisy_rademacher_run() -> None:
    config = ExperimentConfig()

    assert config.method == MethodName.CS_R
    assert config.grid.n_points == 100
    assert config.sequences.count == 20
    assert config.n_shots == 5000
    assert config.sweep is None


def test_disabled_shots_mean_noiseless() -> None:
    config = ExperimentConfig.model_validate({"shots": {"enabled": False}})

    assert config.n_shots is None


def test_unknown_keys_are_rejected() -> None:
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"grid": {"points": 50}})


def test_method_params_merge_solver_and_sequence_settings() -> None:
    config = ExperimentConfig.model_validate(
        {"sequences": {"p": 0.1, "fourier_mode": "ideal"}, "solver": {"lambda_rel": 0.01}}
    )

    params = config.method_params()

    assert params["p"] == 0.1
    assert params["fourier_mode"] == "ideal"
    assert params["lambda_rel"] == 0.01


def test_spectrum_params_follow_family() -> None:
    config = ExperimentConfig.model_validate(
        {"spectrum": {"family": "quantum_dot", "background_amplitude": 0.1}}
    )

    assert config.spectrum.family == SpectrumFamily.QUANTUM_DOT
    assert config.spectrum.params() == {"background_amplitude": 0.1}


@pytest.mark.parametrize(
    "sweep",
    [
        {"kind": "accuracy"},
        {"kind": "accuracy", "k_values": [5, -1]},
        {"kind": "pulse_budget", "k_values": [5], "p_values": [0.5, 1.0]},
    ],
)
def test_invalid_sweeps_are_rejected(sweep: dict) -> None:
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"sweep": sweep})


def test_curvature_comparison_needs_no_k_values() -> None:
    config = ExperimentConfig.model_validate({"sweep": {"kind": "curvature_vs_tgv"}})

    assert config.sweep.kind == SweepKind.CURVATURE_VS_TGV


def test_seed_must_fit_in_64_bits() -> None:
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"seed": 2**64})


def test_fingerprint_tracks_content() -> None:
    base = ExperimentConfig()

    assert base.fingerprint() == ExperimentConfig().fingerprint()
    assert ExperimentConfig(seed=1).fingerprint() != base.fingerprint()


@pytest.mark.parametrize("name", settings.preset_names)
def test_shipped_presets_validate(name: str) -> None:
    path = Path(settings.preset_path(name))

    config = ExperimentConfig.model_validate(tomllib.loads(path.read_text()))

    assert config.grid.n_points >= 3


def test_every_preset_is_shipped() -> None:
    assert len(settings.shipped_presets) == 10


def test_figure_names_resolve_to_shipped_presets() -> None:
    figures = ["fig1a", "fig1b", "fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4"]

    assert set(figures) <= set(settings.preset_names)
    for name in figures:
        assert Path(settings.preset_path(name)).is_file()
    assert settings.preset_path("fig2a") == settings.preset_path("sparse_rademacher")


@pytest.mark.parametrize("name", ["sparse_phase_transition", "kc_scaling"])
def test_rademacher_sweep_presets_enable_shots(name: str) -> None:
    config = ExperimentConfig.model_validate(
        tomllib.loads(Path(settings.preset_path(name)).read_text())
    )

    assert config.shots.enabled
    assert config.shots.n_shots == 5000


def test_bundle_file_rejects_extra_fields() -> None:
    with pytest.raises(ValidationError):
        MeasurementBundleFile.model_validate({"grid": {}, "unexpected": 1})
