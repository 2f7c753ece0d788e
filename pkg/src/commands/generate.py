from __future__ import annotations

import logging
from pathlib import Path

import click

from src.schemas.files import SequenceFile, SpectrumFile
from src.spectroscopy.services.control import PulseSequence
from src.spectroscopy.services.spectra import Spectrum, write_spectrum_csv
from src.spectroscopy.services.trials import TrialSeeds, build_spectrum
from src.utils.helper import write_json

from .common import RunContext, build_service, common_options, grid_from_config

logger = logging.getLogger("csqns.cli")

SPECTRUM_JSON = "spectrum.json"
SPECTRUM_CSV = "spectrum.csv"
SEQUENCES_JSON = "sequences.json"


def generate_inputs(ctx: RunContext) -> tuple[Spectrum, list[PulseSequence]]:
    """Trial-0 spectrum and sequences for the config, as a sweep would draw them."""
    config = ctx.config
    grid = grid_from_config(config)
    seeds = TrialSeeds.derive(config.seed, 0)
    truth = build_spectrum(config.spectrum.family, grid, seeds.spectrum, config.spectrum.params())
    sequences = build_service().design(
        config.method.value, grid, config.sequences.count, seeds.sequences, config.method_params()
    )
    return truth, sequences


def write_inputs(ctx: RunContext, truth: Spectrum, sequences: list[PulseSequence]) -> list[Path]:
    config = ctx.config
    spectrum_file = SpectrumFile(
        grid=truth.grid.to_dict(),
        values=truth.values.tolist(),
        family=config.spectrum.family.value,
        config_hash=ctx.config_hash,
    )
    sequence_file = SequenceFile(
        method=config.method.value,
        seed=config.seed,
        grid=truth.grid.to_dict(),
        sequences=[seq.to_dict(include_signs=True) for seq in sequences],
        config_hash=ctx.config_hash,
    )

    csv_path = ctx.path(SPECTRUM_CSV)
    write_spectrum_csv(truth, csv_path, config_hash=ctx.config_hash)
    return [
        write_json(ctx.path(SPECTRUM_JSON), spectrum_file.model_dump(mode="json")),
        csv_path,
        write_json(ctx.path(SEQUENCES_JSON), sequence_file.model_dump(mode="json")),
    ]


@click.command("generate")
@common_options
def generate(config_path, preset, out_dir, seed, jobs, plot) -> None:
    """Write the spectrum and pulse sequences an experiment would use."""
    ctx = RunContext.from_options(config_path, preset, out_dir, seed, jobs, plot)
    truth, sequences = generate_inputs(ctx)
    for path in write_inputs(ctx, truth, sequences):
        logger.info("Wrote %s", path)
    click.echo(f"generated {len(sequences)} sequences in {ctx.out_dir}")
