from __future__ import annotations

import logging

import click
import pandas as pd

from src.data_types.spectroscopy import SpectrumFamily, SweepKind
from src.schemas.config import ExperimentConfig
from src.spectroscopy.services.control import expected_pulse_count, expected_sign_changes
from src.spectroscopy.services.experiments import (
    TRIAL_COLUMNS,
    SweepResult,
    accuracy_vs_k,
    code_version,
    critical_k,
    curvature_vs_tgv,
    empirical_pulse_count,
    isotonic_deviation,
    kc_scaling_study,
    pulse_budget_study,
    qd_comparison,
    transition_width,
)
from src.spectroscopy.services.trials import SweepSpec
from src.utils.helper import dataframeToJson, write_json
from src.utils.plotting import plot_error_scatter, plot_scaling

from .common import RunContext, common_options, sweep_spec_from_config
from .report import SUMMARY_JSON, TRIALS_CSV, render_report

logger = logging.getLogger("csqns.cli")


def run_sweeps(ctx: RunContext) -> tuple[dict[str, SweepResult], dict]:
    """Dispatch on ``sweep.kind``; returns the labelled sweeps and the kind's report."""
    config = ctx.config
    section = config.sweep
    base = sweep_spec_from_config(config)

    if section.kind == SweepKind.ACCURACY:
        sweeps = _series_sweeps(config, base, ctx.jobs)
        report = {
            label: {
                "critical_k": critical_k(sweep, section.threshold),
                "isotonic_deviation": isotonic_deviation(sweep),
            }
            for label, sweep in sweeps.items()
        }
        return sweeps, report

    if section.kind == SweepKind.KC_SCALING:
        scaling, sweeps = kc_scaling_study(
            base,
            section.sparsities,
            section.sizes,
            fixed_sparsity=section.fixed_sparsity,
            threshold=section.threshold,
            jobs=ctx.jobs,
        )
        kc_s = {s: critical_k(sweeps[f"s={s}"], section.threshold) for s in section.sparsities}
        kc_n = {n: critical_k(sweeps[f"N={n}"], section.threshold) for n in section.sizes}
        if ctx.plot:
            plot_scaling(kc_s, kc_n, ctx.path("kc_scaling.svg"))
        report = {
            "kc_by_sparsity": {str(k): v for k, v in kc_s.items()},
            "kc_by_size": {str(k): v for k, v in kc_n.items()},
            **scaling.to_dict(),
        }
        return sweeps, report

    if section.kind == SweepKind.QD_COMPARISON:
        sweeps = qd_comparison(base, section.k_values, section.methods, jobs=ctx.jobs)
        report = {
            label: {
                "critical_n_set": critical_k(sweep, section.threshold),
                "transition_width": transition_width(sweep.k_values, sweep.mean_errors),
            }
            for label, sweep in sweeps.items()
        }
        return sweeps, report

    if section.kind == SweepKind.PULSE_BUDGET:
        points = pulse_budget_study(section.p_values, base, jobs=ctx.jobs)
        sweeps = {f"p={p}": point.sweep for p, point in points.items()}
        report = {}
        for p, point in points.items():
            mean, stderr = empirical_pulse_count(base.n_points, p, seed=config.seed)
            report[f"p={p}"] = {
                **point.to_dict(),
                "critical_n_set": critical_k(point.sweep, section.threshold),
                "pulse_count_mean": mean,
                "pulse_count_stderr": stderr,
                "pulse_count_formula": expected_pulse_count(base.n_points, p),
                "pulse_count_single_shot": expected_sign_changes(base.n_points, p),
            }
        return sweeps, report

    comparison = curvature_vs_tgv(
        n_instances=section.n_instances,
        n_points=config.grid.n_points,
        count=config.sequences.count,
        kinks=config.spectrum.kinks,
        noise_level=section.noise_level,
        seed=config.seed,
        lambda_rel=config.solver.lambda_rel,
    )
    if ctx.plot:
        plot_error_scatter(
            comparison.tgv_errors,
            comparison.curvature_errors,
            ctx.path("curvature_vs_tgv.svg"),
            xlabel="TGV error",
            ylabel="curvature error",
        )
    return {}, comparison.to_dict()


def _series_sweeps(config: ExperimentConfig, base: SweepSpec, jobs: int) -> dict[str, SweepResult]:
    section = config.sweep
    if not section.series:
        return {config.method.value: accuracy_vs_k(base, jobs=jobs)}
    key = "kinks" if config.spectrum.family == SpectrumFamily.PIECEWISE_LINEAR else "sparsity"
    return {
        f"s={value}": accuracy_vs_k(
            base.with_(spectrum_params={**base.spectrum_params, key: value}), jobs=jobs
        )
        for value in section.series
    }


def trials_frame(sweeps: dict[str, SweepResult], config_hash: str) -> pd.DataFrame:
    frames = []
    for label, sweep in sweeps.items():
        frame = sweep.trials.copy()
        frame.insert(0, "series", label)
        frames.append(frame)
    if not frames:
        frames.append(pd.DataFrame(columns=["series", *TRIAL_COLUMNS]))
    trials = pd.concat(frames, ignore_index=True)
    trials["config_hash"] = config_hash
    return trials


@click.command("sweep")
@common_options
def sweep(config_path, preset, out_dir, seed, jobs, plot) -> None:
    """Run the config's sweep and write per-trial rows, a summary and plots."""
    ctx = RunContext.from_options(config_path, preset, out_dir, seed, jobs, plot)
    if ctx.config.sweep is None:
        raise click.UsageError("the config has no [sweep] section")

    sweeps, report = run_sweeps(ctx)
    trials = trials_frame(sweeps, ctx.config_hash)
    trials.to_csv(ctx.path(TRIALS_CSV), index=False, float_format="%.17g")

    summary = {
        "config_hash": ctx.config_hash,
        "code_version": code_version(),
        "kind": ctx.config.sweep.kind.value,
        "method": ctx.config.method.value,
        "threshold": ctx.config.sweep.threshold,
        "series": {
            label: {**result.to_dict(), "points": dataframeToJson(result.summary)}
            for label, result in sweeps.items()
        },
        "report": report,
    }
    write_json(ctx.path(SUMMARY_JSON), summary)
    render_report(ctx.out_dir, plot=ctx.plot)

    failed = int((trials["status"] != "ok").sum()) if len(trials) else 0
    click.echo(f"sweep {summary['kind']}: {len(trials)} trials ({failed} failed) -> {ctx.out_dir}")
