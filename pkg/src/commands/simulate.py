from __future__ import annotations

import logging
from pathlib import Path

import click
import numpy as np

from src.core.errors import InputError
from src.schemas.files import SequenceFile, SpectrumFile
from src.spectroscopy.services.control import PulseSequence, sequence_from_dict
from src.spectroscopy.services.forward import (
    MeasurementBundle,
    build_measurement_matrix,
    simulate_record,
)
from src.spectroscopy.services.spectra import FrequencyGrid, Spectrum
from src.spectroscopy.services.trials import TrialSeeds, chi_amplitude
from src.utils.helper import write_json

from .common import RunContext, common_options, read_model
from .generate import SEQUENCES_JSON, SPECTRUM_JSON, generate_inputs, write_inputs

logger = logging.getLogger("csqns.cli")

BUNDLE_JSON = "bundle.json"


def load_inputs(spectrum_path: Path, sequences_path: Path) -> tuple[Spectrum, list[PulseSequence]]:
    spectrum_file = read_model(spectrum_path, SpectrumFile)
    sequence_file = read_model(sequences_path, SequenceFile)
    try:
        truth = Spectrum(
            FrequencyGrid.from_dict(spectrum_file.grid.model_dump(mode="json")),
            np.asarray(spectrum_file.values, dtype=float),
        )
        sequences = [sequence_from_dict(item) for item in sequence_file.sequences]
    except (KeyError, ValueError) as exc:
        raise InputError(f"cannot rebuild inputs: {exc}") from exc
    return truth, sequences


def simulate_bundle(
    ctx: RunContext, truth: Spectrum, sequences: list[PulseSequence]
) -> MeasurementBundle:
    """Measure ``truth`` with every sequence, scaled as the sweeps scale it."""
    config = ctx.config
    seeds = TrialSeeds.derive(config.seed, 0)
    matrix = build_measurement_matrix(sequences, truth.grid)
    n_shots = config.n_shots
    amplitude = chi_amplitude(matrix, truth, config.shots.chi_target) if n_shots else 1.0
    record = simulate_record(
        matrix, truth.scaled(amplitude), n_shots=n_shots, seed=seeds.shots, jobs=ctx.jobs
    )
    return MeasurementBundle(
        matrix=matrix,
        record=record,
        truth=truth,
        amplitude=amplitude,
        method=config.method.value,
    )


@click.command("simulate")
@common_options
@click.option("--spectrum", "spectrum_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--sequences", "sequences_path", type=click.Path(dir_okay=False, path_type=Path))
def simulate(config_path, preset, out_dir, seed, jobs, plot, spectrum_path, sequences_path) -> None:
    """Write the measurement bundle for a spectrum and its sequences.

    Inputs default to the generate outputs in the run directory and are
    generated inline when neither exists nor is given.
    """
    ctx = RunContext.from_options(config_path, preset, out_dir, seed, jobs, plot)
    explicit = spectrum_path is not None or sequences_path is not None
    spectrum_path = spectrum_path or ctx.out_dir / SPECTRUM_JSON
    sequences_path = sequences_path or ctx.out_dir / SEQUENCES_JSON

    if explicit or spectrum_path.exists() or sequences_path.exists():
        truth, sequences = load_inputs(spectrum_path, sequences_path)
    else:
        truth, sequences = generate_inputs(ctx)
        write_inputs(ctx, truth, sequences)

    bundle = simulate_bundle(ctx, truth, sequences)
    path = write_json(ctx.path(BUNDLE_JSON), {**bundle.to_dict(), "config_hash": ctx.config_hash})
    logger.info("Wrote %s", path)
    click.echo(f"simulated {bundle.matrix.n_rows} measurements into {path}")
