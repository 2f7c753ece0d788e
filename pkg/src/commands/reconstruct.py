from __future__ import annotations

import logging
from pathlib import Path

import click

from src.core.errors import InputError
from src.data_types.spectroscopy import SolverProgram
from src.schemas.files import MeasurementBundleFile, ReconstructionFile
from src.spectroscopy.services.forward import MeasurementBundle
from src.spectroscopy.services.reconstruction import solve_program
from src.spectroscopy.services.solvers import ReconstructionResult
from src.spectroscopy.services.spectra import l2_error
from src.utils.helper import file_hash, write_json
from src.utils.plotting import plot_reconstruction

from .common import RunContext, build_service, common_options, read_model
from .simulate import BUNDLE_JSON

logger = logging.getLogger("csqns.cli")

RESULT_JSON = "result.json"
RESULT_SVG = "reconstruction.svg"


def load_bundle(path: Path) -> MeasurementBundle:
    bundle_file = read_model(path, MeasurementBundleFile)
    try:
        return MeasurementBundle.from_dict(bundle_file.model_dump(mode="json"))
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path} is not a usable bundle: {exc}") from exc


def run_reconstruction(
    ctx: RunContext, bundle: MeasurementBundle, program: str | None
) -> ReconstructionResult:
    params = ctx.config.method_params()
    if program is not None:
        return solve_program(program, bundle.matrix, bundle.record, params)
    method = bundle.method or ctx.config.method.value
    return build_service().reconstruct(method, bundle.matrix, bundle.record, params)


@click.command("reconstruct")
@common_options
@click.option("--bundle", "bundle_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option(
    "--method",
    "program",
    type=click.Choice([p.value for p in SolverProgram]),
    help="Solve with this program instead of the bundle's reconstruction method.",
)
def reconstruct(config_path, preset, out_dir, seed, jobs, plot, bundle_path, program) -> None:
    """Reconstruct the spectrum from a measurement bundle."""
    ctx = RunContext.from_options(config_path, preset, out_dir, seed, jobs, plot)
    bundle_path = bundle_path or ctx.out_dir / BUNDLE_JSON
    bundle = load_bundle(bundle_path)

    result = run_reconstruction(ctx, bundle, program)
    if not result.converged:
        logger.warning("Reconstruction did not converge after %s iterations", result.iterations)

    estimate = result.spectrum_estimate / bundle.amplitude
    error = None
    if bundle.truth is not None:
        error = l2_error(estimate, bundle.truth.values, relative=True)

    payload = ReconstructionFile(
        **{
            **result.to_dict(),
            "spectrum_estimate": estimate.tolist(),
            "method": bundle.method,
            "error": error,
            "omega": bundle.grid.omega.tolist(),
            "config_hash": ctx.config_hash,
            "bundle_hash": file_hash(bundle_path),
        }
    )
    path = write_json(ctx.path(RESULT_JSON), payload.model_dump(mode="json"))
    if ctx.plot:
        plot_reconstruction(
            bundle.grid.omega,
            estimate,
            ctx.path(RESULT_SVG),
            truth=None if bundle.truth is None else bundle.truth.values,
            title=f"{result.program} (K={bundle.matrix.n_rows})",
        )
    summary = f"error={error:.4g}" if error is not None else "no truth in bundle"
    click.echo(f"{result.program}: converged={result.converged} {summary} -> {path}")
