from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

logger = logging.getLogger("csqns.cli")

# stable element ids so reruns produce identical SVG bytes
plt.rcParams["svg.hashsalt"] = "csqns"
SVG_METADATA = {"Date": None, "Creator": None}


def plot_reconstruction(
    omega: np.ndarray,
    estimate: np.ndarray,
    path: Path,
    truth: np.ndarray | None = None,
    title: str = "",
) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    if truth is not None:
        ax.plot(omega, truth, color="black", lw=1.5, label="true")
    ax.plot(omega, estimate, color="tab:red", lw=1.0, ls="--", marker=".", ms=3, label="estimate")
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"$S(\omega)$")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_error_curves(
    curves: Mapping[str, tuple[Sequence[float], Sequence[float], Sequence[float]]],
    path: Path,
    xlabel: str = "K",
    threshold: float | None = None,
    log_y: bool = False,
) -> Path:
    """Mean error against K per series, with confidence half-widths as error bars."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (k, mean, half_width) in curves.items():
        ax.errorbar(k, mean, yerr=np.nan_to_num(half_width), marker="o", ms=3, capsize=2, label=label)
    if threshold is not None:
        ax.axhline(threshold, color="gray", lw=0.8, ls=":")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean error")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_scaling(
    kc_by_sparsity: Mapping[int, float],
    kc_by_size: Mapping[int, float],
    path: Path,
) -> Path:
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    s = sorted(kc_by_sparsity)
    left.plot(s, [kc_by_sparsity[v] for v in s], marker="o")
    left.set_xlabel("s")
    left.set_ylabel(r"$K_c$")
    sizes = sorted(kc_by_size)
    right.plot(np.log(sizes), [kc_by_size[v] for v in sizes], marker="o")
    right.set_xlabel(r"$\log N$")
    right.set_ylabel(r"$K_c$")
    fig.tight_layout()
    return _save(fig, path)


def plot_error_scatter(x_errors: Sequence[float], y_errors: Sequence[float], path: Path,
                       xlabel: str, ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(x_errors, y_errors, s=10)
    top = max([*x_errors, *y_errors, 1e-12])
    ax.plot([0, top], [0, top], color="gray", lw=0.8, ls=":")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path
