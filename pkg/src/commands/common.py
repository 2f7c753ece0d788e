from __future__ import annotations

import json
import logging
import tomllib
from pathlib import Path
from typing import TypeVar

import click
from pydantic import BaseModel, ValidationError

from src.core.config import settings
from src.core.errors import ConfigError, InputError
from src.data_types.spectroscopy import GridMode
from src.schemas.config import ExperimentConfig
from src.spectroscopy.methods import build_method_registry
from src.spectroscopy.services.reconstruction import ReconstructionService
from src.spectroscopy.services.spectra import FrequencyGrid
from src.spectroscopy.services.trials import SweepSpec

logger = logging.getLogger("csqns.cli")

ModelT = TypeVar("ModelT", bound=BaseModel)


def common_options(func):
    """--config/--preset/--out/--seed/--jobs/--plot shared by every run command."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path)),
        click.option("--preset", help="Name of a shipped preset under data/presets."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path)),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None),
        click.option("--jobs", type=click.IntRange(min=1), default=None),
        click.option("--plot/--no-plot", default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


class RunContext:
    """A validated config plus the flags that override it."""

    def __init__(
        self,
        config: ExperimentConfig,
        out_dir: Path,
        jobs: int,
        plot: bool,
    ) -> None:
        self.config = config
        self.out_dir = out_dir
        self.jobs = jobs
        self.plot = plot
        self.config_hash = config.fingerprint()

    @classmethod
    def from_options(
        cls,
        config_path: Path | None,
        preset: str | None,
        out_dir: Path | None,
        seed: int | None,
        jobs: int | None,
        plot: bool | None,
    ) -> RunContext:
        config = load_config(config_path, preset)
        if seed is not None:
            config = ExperimentConfig.model_validate({**config.model_dump(mode="json"), "seed": seed})
        directory = out_dir or Path(config.output.directory or settings.output_dir)
        return cls(
            config=config,
            out_dir=directory,
            jobs=jobs or settings.jobs,
            plot=config.output.plot if plot is None else plot,
        )

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name


def load_config(config_path: Path | None, preset: str | None) -> ExperimentConfig:
    if config_path is not None and preset is not None:
        raise ConfigError("pass either --config or --preset, not both")
    if preset is not None:
        if preset not in settings.preset_names:
            raise ConfigError(f"unknown preset {preset!r}; available: {settings.preset_names}")
        config_path = Path(settings.preset_path(preset))
    if config_path is None:
        return ExperimentConfig()
    if not config_path.is_file():
        raise ConfigError(f"config file {config_path} does not exist")
    try:
        with config_path.open("rb") as handle:
            payload = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{config_path}: {exc}") from exc
    logger.info("Loaded config %s", config_path)
    return ExperimentConfig.model_validate(payload)


def read_model(path: Path, model: type[ModelT]) -> ModelT:
    """Parse a JSON artifact; anything missing or malformed is an InputError."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file {path} does not exist")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return model.model_validate(payload)
    except (json.JSONDecodeError, ValidationError) as exc:
        raise InputError(f"{path} is not a valid {model.__name__}: {exc}") from exc


def grid_from_config(config: ExperimentConfig) -> FrequencyGrid:
    section = config.grid
    if section.mode == GridMode.CIRCULANT:
        return FrequencyGrid.circulant(section.n_points, section.tau)
    return FrequencyGrid.band(section.n_points, section.tau, omega_c=section.omega_c)


def sweep_spec_from_config(config: ExperimentConfig) -> SweepSpec:
    if config.sweep is None:
        raise ConfigError("this command needs a [sweep] section")
    n_trials = settings.full_trials if settings.full_scale else config.sweep.n_trials
    return SweepSpec(
        method=config.method,
        spectrum_family=config.spectrum.family,
        k_values=tuple(config.sweep.k_values) or (config.sequences.count,),
        n_trials=n_trials,
        n_points=config.grid.n_points,
        tau=config.grid.tau,
        spectrum_params=config.spectrum.params(),
        method_params=config.method_params(),
        n_shots=config.n_shots,
        chi_target=config.shots.chi_target,
        seed=config.seed,
    )


def build_service() -> ReconstructionService:
    return ReconstructionService(build_method_registry())
