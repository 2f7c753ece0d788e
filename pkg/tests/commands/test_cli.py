from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from src.main import EXIT_CONFIG, EXIT_INPUT, cli
from src.spectroscopy.services.forward import build_toeplitz, quadratic_measurement
from src.spectroscopy.services.spectra import FrequencyGrid, Spectrum

SPARSE_CONFIG = """
seed = 11
method = "CS_R"

[grid]
n_points = 30

[spectrum]
family = "sparse"
sparsity = 4

[sequences]
count = 8

[shots]
enabled = false

[solver]
max_iter = 300
"""

SWEEP_CONFIG = """
seed = 2
method = "CS_R"

[grid]
n_points = 20

[spectrum]
family = "sparse"
sparsity = 1

[shots]
enabled = false

[solver]
max_iter = 200

[sweep]
kind = "accuracy"
k_values = [6]
n_trials = 3

[output]
plot = true
"""


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def _config(tmp_path: Path, text: str, name: str = "config.toml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _run(runner: CliRunner, *args: str | Path):
    return runner.invoke(cli, [str(arg) for arg in args])


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


# GENERATE ------------------------------------------------------------------------------


def test_generate_writes_spectrum_and_sequences(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)
    out = tmp_path / "run"

    result = _run(runner, "generate", "--config", config, "--out", out)

    assert result.exit_code == 0, result.output
    spectrum = _read_json(out / "spectrum.json")
    sequences = _read_json(out / "sequences.json")
    assert sum(value > 0 for value in spectrum["values"]) == 4
    assert len(sequences["sequences"]) == 8
    assert all(len(item["signs"]) == 30 for item in sequences["sequences"])
    assert (out / "spectrum.csv").is_file()


def test_generate_is_byte_identical_on_rerun(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)

    for name in ("first", "second"):
        assert _run(runner, "generate", "--config", config, "--out", tmp_path / name).exit_code == 0

    for artifact in ("spectrum.json", "spectrum.csv", "sequences.json"):
        first = (tmp_path / "first" / artifact).read_bytes()
        assert first == (tmp_path / "second" / artifact).read_bytes()


def test_generate_seed_flag_changes_the_draw(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)

    _run(runner, "generate", "--config", config, "--out", tmp_path / "a")
    _run(runner, "generate", "--config", config, "--out", tmp_path / "b", "--seed", "12")

    first = _read_json(tmp_path / "a" / "spectrum.json")
    second = _read_json(tmp_path / "b" / "spectrum.json")
    assert first["values"] != second["values"]
    assert first["config_hash"] != second["config_hash"]


def test_figure_preset_matches_named_preset(runner: CliRunner, tmp_path: Path) -> None:
    for preset, name in (("fig2a", "figure"), ("sparse_rademacher", "named")):
        result = _run(runner, "generate", "--preset", preset, "--out", tmp_path / name, "--no-plot")
        assert result.exit_code == 0, result.output

    first = (tmp_path / "figure" / "sequences.json").read_bytes()
    assert first == (tmp_path / "named" / "sequences.json").read_bytes()


def test_generated_piecewise_spectrum_has_requested_kinks(
    runner: CliRunner, tmp_path: Path
) -> None:
    config = _config(
        tmp_path,
        'method = "CS_TGV"\n[grid]\nn_points = 50\n'
        '[spectrum]\nfamily = "piecewise_linear"\nkinks = 4\n'
        '[sequences]\ncount = 5\nfourier_mode = "ideal"\n',
    )
    out = tmp_path / "run"

    assert _run(runner, "generate", "--config", config, "--out", out).exit_code == 0

    frame = pd.read_csv(out / "spectrum.csv", float_precision="round_trip")
    curvature = np.diff(frame["value"].to_numpy(), n=2)
    assert int(np.count_nonzero(np.abs(curvature) > 1e-9)) == 4


# SIMULATE ------------------------------------------------------------------------------


def test_noiseless_bundle_is_filter_times_spectrum(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)
    out = tmp_path / "run"
    assert _run(runner, "generate", "--config", config, "--out", out).exit_code == 0

    result = _run(runner, "simulate", "--config", config, "--out", out)

    assert result.exit_code == 0, result.output
    bundle = _read_json(out / "bundle.json")
    expected = np.asarray(bundle["F"]) @ np.asarray(bundle["truth"]) * bundle["delta_omega"]
    assert np.allclose(bundle["chi"], expected, rtol=1e-12, atol=0)
    assert bundle["shots"] is None
    assert bundle["amplitude"] == 1.0


def test_simulate_generates_missing_inputs(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG.replace("count = 8", "count = 0"))
    out = tmp_path / "run"

    result = _run(runner, "simulate", "--config", config, "--out", out)

    assert result.exit_code == 0, result.output
    bundle = _read_json(out / "bundle.json")
    assert bundle["F"] == []
    assert bundle["chi"] == []
    assert (out / "spectrum.json").is_file()


def test_circulant_bundle_matches_toeplitz_quadratic_form(
    runner: CliRunner, tmp_path: Path
) -> None:
    text = SPARSE_CONFIG.replace("n_points = 30", 'n_points = 12\nmode = "circulant"')
    config = _config(tmp_path, text.replace("count = 8", "count = 5"))
    out = tmp_path / "run"

    assert _run(runner, "simulate", "--config", config, "--out", out).exit_code == 0

    bundle = _read_json(out / "bundle.json")
    sequences = _read_json(out / "sequences.json")["sequences"]
    grid = FrequencyGrid.circulant(12)
    operator = build_toeplitz(Spectrum(grid, np.asarray(bundle["truth"])))
    for chi, seq in zip(bundle["chi"], sequences):
        quadratic = quadratic_measurement(np.asarray(seq["signs"]), operator)
        assert chi == pytest.approx(operator.measurement_scale * quadratic, rel=1e-9)


def test_simulate_with_shots_rescales_truth(runner: CliRunner, tmp_path: Path) -> None:
    text = SPARSE_CONFIG.replace("enabled = false", "enabled = true\nn_shots = 1000")
    config = _config(tmp_path, text)
    out = tmp_path / "run"

    assert _run(runner, "simulate", "--config", config, "--out", out).exit_code == 0

    bundle = _read_json(out / "bundle.json")
    assert bundle["shots"] == 1000
    assert np.mean(bundle["chi_noiseless"]) == pytest.approx(0.5)
    assert len(bundle["seeds"]) == 8


def test_simulate_with_missing_explicit_input_fails(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)

    result = _run(
        runner,
        "simulate",
        "--config",
        config,
        "--out",
        tmp_path / "run",
        "--spectrum",
        tmp_path / "absent.json",
    )

    assert result.exit_code == EXIT_INPUT


# RECONSTRUCT ---------------------------------------------------------------------------


def _identity_bundle(path: Path) -> Path:
    grid = FrequencyGrid.band(3)
    payload = {
        "grid": grid.to_dict(),
        "delta_omega": 1.0,
        "row_meta": [{}, {}, {}],
        "F": np.eye(3).tolist(),
        "chi": [0.5, -0.2, 0.1],
        "chi_noiseless": [0.5, -0.2, 0.1],
        "chi_sigma": [0.0, 0.0, 0.0],
        "clipped": [False, False, False],
        "shots": None,
        "seeds": [0, 1, 2],
    }
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_reconstruct_with_explicit_program(runner: CliRunner, tmp_path: Path) -> None:
    bundle = _identity_bundle(tmp_path / "bundle.json")
    out = tmp_path / "run"

    result = _run(runner, "reconstruct", "--bundle", bundle, "--method", "nnls", "--out", out)

    assert result.exit_code == 0, result.output
    payload = _read_json(out / "result.json")
    assert np.allclose(payload["spectrum_estimate"], [0.5, 0.0, 0.1])
    assert payload["program"] == "nnls"
    assert payload["error"] is None


def test_reconstruct_is_byte_identical_on_rerun(runner: CliRunner, tmp_path: Path) -> None:
    bundle = _identity_bundle(tmp_path / "bundle.json")

    for name in ("first", "second"):
        args = ("reconstruct", "--bundle", bundle, "--method", "l1", "--out", tmp_path / name)
        assert _run(runner, *args).exit_code == 0

    first = (tmp_path / "first" / "result.json").read_bytes()
    assert first == (tmp_path / "second" / "result.json").read_bytes()


def test_full_pipeline_scores_against_truth(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)
    out = tmp_path / "run"

    for command in ("generate", "simulate", "reconstruct"):
        result = _run(runner, command, "--config", config, "--out", out, "--plot")
        assert result.exit_code == 0, result.output

    payload = _read_json(out / "result.json")
    assert payload["method"] == "CS_R"
    assert payload["error"] >= 0
    assert len(payload["omega"]) == 30
    assert (out / "reconstruction.svg").is_file()


def test_reconstruct_rejects_malformed_bundle(runner: CliRunner, tmp_path: Path) -> None:
    bundle = tmp_path / "bundle.json"
    bundle.write_text("{not json", encoding="utf-8")

    result = _run(runner, "reconstruct", "--bundle", bundle, "--out", tmp_path / "run")

    assert result.exit_code == EXIT_INPUT


def test_reconstruct_rejects_missing_bundle(runner: CliRunner, tmp_path: Path) -> None:
    result = _run(runner, "reconstruct", "--out", tmp_path / "empty")

    assert result.exit_code == EXIT_INPUT


# CONFIG ERRORS -------------------------------------------------------------------------


def test_unknown_config_key_is_a_config_error(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, "[grid]\npoints = 10\n")

    result = _run(runner, "generate", "--config", config, "--out", tmp_path / "run")

    assert result.exit_code == EXIT_CONFIG


def test_unknown_preset_is_a_config_error(runner: CliRunner, tmp_path: Path) -> None:
    result = _run(runner, "generate", "--preset", "no_such_preset", "--out", tmp_path)

    assert result.exit_code == EXIT_CONFIG


def test_config_and_preset_are_exclusive(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)

    result = _run(
        runner, "generate", "--config", config, "--preset", "sparse_rademacher", "--out", tmp_path
    )

    assert result.exit_code == EXIT_CONFIG


def test_invalid_toml_is_a_config_error(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, "seed = [unterminated\n")

    result = _run(runner, "generate", "--config", config, "--out", tmp_path / "run")

    assert result.exit_code == EXIT_CONFIG


# SWEEP + REPORT ------------------------------------------------------------------------


def test_sweep_writes_trials_summary_and_plot(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SWEEP_CONFIG)
    out = tmp_path / "run"

    result = _run(runner, "sweep", "--config", config, "--out", out)

    assert result.exit_code == 0, result.output
    trials = pd.read_csv(out / "trials.csv")
    assert len(trials) == 3
    assert set(trials["k"]) == {6}
    assert (out / "errors.svg").is_file()
    summary = _read_json(out / "summary.json")
    assert summary["kind"] == "accuracy"
    assert "critical_k" in summary["report"]["CS_R"]


def test_sweep_summary_is_byte_identical_on_rerun(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SWEEP_CONFIG)

    for name in ("first", "second"):
        args = ("sweep", "--config", config, "--out", tmp_path / name, "--no-plot")
        assert _run(runner, *args).exit_code == 0

    for artifact in ("summary.json", "trials.csv", "summary.csv"):
        first = (tmp_path / "first" / artifact).read_bytes()
        assert first == (tmp_path / "second" / artifact).read_bytes()


def test_report_rerenders_existing_run(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SWEEP_CONFIG)
    out = tmp_path / "run"
    assert _run(runner, "sweep", "--config", config, "--out", out, "--no-plot").exit_code == 0
    (out / "summary.csv").unlink()

    result = _run(runner, "report", out)

    assert result.exit_code == 0, result.output
    table = pd.read_csv(out / "summary.csv")
    assert table["n_trials"].tolist() == [3]
    assert (out / "errors.svg").is_file()


def test_sweep_needs_a_sweep_section(runner: CliRunner, tmp_path: Path) -> None:
    config = _config(tmp_path, SPARSE_CONFIG)

    result = _run(runner, "sweep", "--config", config, "--out", tmp_path / "run")

    assert result.exit_code == 2
    assert "[sweep]" in result.output


def test_report_on_empty_directory_is_an_input_error(runner: CliRunner, tmp_path: Path) -> None:
    result = _run(runner, "report", tmp_path)

    assert result.exit_code == EXIT_INPUT
