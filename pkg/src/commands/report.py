from __future__ import annotations

import json
import logging
from pathlib import Path

import click
import pandas as pd

from src.core.errors import InputError
from src.spectroscopy.services.experiments import SweepResult
from src.utils.plotting import plot_error_curves

logger = logging.getLogger("csqns.cli")

TRIALS_CSV = "trials.csv"
SUMMARY_JSON = "summary.json"
SUMMARY_CSV = "summary.csv"
ERRORS_SVG = "errors.svg"
N_SET_KINDS = ("qd_comparison", "pulse_budget")


def load_run(run_dir: Path) -> tuple[dict, pd.DataFrame]:
    summary_path = run_dir / SUMMARY_JSON
    trials_path = run_dir / TRIALS_CSV
    for path in (summary_path, trials_path):
        if not path.is_file():
            raise InputError(f"{path} does not exist; run `csqns sweep` first")
    try:
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        trials = pd.read_csv(trials_path, keep_default_na=False, na_values=[""])
    except (json.JSONDecodeError, pd.errors.ParserError) as exc:
        raise InputError(f"cannot read run in {run_dir}: {exc}") from exc
    return summary, trials


def render_report(run_dir: Path, plot: bool = True) -> Path:
    """Rebuild summary.csv, and the error-vs-K plot, from a finished run."""
    summary, trials = load_run(Path(run_dir))
    config_hash = summary.get("config_hash", "")

    tables = []
    curves = {}
    for label, group in trials.groupby("series", sort=False):
        result = SweepResult(
            spec=summary["series"].get(label, {}).get("spec", {}),
            trials=group.drop(columns=["series", "config_hash"], errors="ignore"),
            spec_hash=summary["series"].get(label, {}).get("spec_hash", ""),
            version=summary.get("code_version", ""),
        )
        table = result.summary
        table.insert(0, "series", label)
        tables.append(table)
        curves[str(label)] = (table["k"], table["mean_error"], table["half_width"])

    table = pd.concat(tables, ignore_index=True) if tables else pd.DataFrame()
    table["config_hash"] = config_hash
    csv_path = Path(run_dir) / SUMMARY_CSV
    table.to_csv(csv_path, index=False, float_format="%.17g")
    logger.info("Wrote %s", csv_path)

    if plot and curves:
        n_set_axis = summary.get("method") == "CPMG" or summary.get("kind") in N_SET_KINDS
        xlabel = "N_set" if n_set_axis else "K"
        plot_error_curves(
            curves,
            Path(run_dir) / ERRORS_SVG,
            xlabel=xlabel,
            threshold=summary.get("threshold"),
            log_y=summary.get("kind") == "qd_comparison",
        )
    return csv_path


@click.command("report")
@click.argument("run_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--plot/--no-plot", default=True)
def report(run_dir: Path, plot: bool) -> None:
    """Re-render tables and plots of an existing sweep run without recomputing."""
    path = render_report(run_dir, plot=plot)
    click.echo(f"report written to {path}")
