from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.linalg import solve_banded

from src.data_types.spectroscopy import GridMode

logger = logging.getLogger("csqns.spectra")

NONZERO_THRESHOLD = 1e-9
SPARSE_MAGNITUDE_RANGE = (0.2, 1.0)
KINK_SLOPE_RANGE = (0.5, 1.5)


@dataclass(frozen=True)
class FrequencyGrid:
    """One-sided angular frequency grid.

    ``band`` grids place ``n_points`` evenly spaced points in (0, omega_c] with
    omega_c <= pi/tau. ``circulant`` grids use omega_n = 2*pi*n/(M*tau) for
    n = 1..M, i.e. the full DFT circle, on which B(S) is exactly circulant.
    ``m_segments`` is the number of control segments of length ``tau`` that
    sequences built for this grid use.
    """

    n_points: int
    tau: float
    omega_c: float
    m_segments: int
    mode: GridMode = GridMode.BAND

    def __post_init__(self) -> None:
        if self.n_points < 1:
            raise ValueError("n_points must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.m_segments < 1:
            raise ValueError("m_segments must be positive")
        if self.omega_c <= 0:
            raise ValueError("omega_c must be positive")
        if self.mode == GridMode.BAND and self.tau * self.omega_c > math.pi * (1 + 1e-12):
            raise ValueError("omega_c must not exceed pi/tau on a band grid")
        if self.mode == GridMode.CIRCULANT and self.n_points != self.m_segments:
            raise ValueError("circulant grids require n_points == m_segments")

    @classmethod
    def band(
        cls,
        n_points: int,
        tau: float = 1.0,
        omega_c: float | None = None,
        m_segments: int | None = None,
    ) -> FrequencyGrid:
        return cls(
            n_points=n_points,
            tau=tau,
            omega_c=math.pi / tau if omega_c is None else omega_c,
            m_segments=n_points if m_segments is None else m_segments,
            mode=GridMode.BAND,
        )

    @classmethod
    def circulant(cls, m_segments: int, tau: float = 1.0) -> FrequencyGrid:
        return cls(
            n_points=m_segments,
            tau=tau,
            omega_c=2 * math.pi / tau,
            m_segments=m_segments,
            mode=GridMode.CIRCULANT,
        )

    @cached_property
    def omega(self) -> np.ndarray:
        n = np.arange(1, self.n_points + 1, dtype=float)
        values = n * self.delta_omega
        values.setflags(write=False)
        return values

    @property
    def delta_omega(self) -> float:
        if self.mode == GridMode.CIRCULANT:
            return 2 * math.pi / (self.m_segments * self.tau)
        return self.omega_c / self.n_points

    @property
    def is_circulant(self) -> bool:
        return self.mode == GridMode.CIRCULANT

    def to_dict(self) -> dict:
        return {
            "n": self.n_points,
            "tau": self.tau,
            "omega_c": self.omega_c,
            "m_segments": self.m_segments,
            "mode": self.mode.value,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> FrequencyGrid:
        mode = GridMode(payload.get("mode", GridMode.BAND))
        n_points = int(payload["n"])
        tau = float(payload.get("tau", 1.0))
        if mode == GridMode.CIRCULANT:
            return cls.circulant(n_points, tau)
        return cls.band(
            n_points,
            tau,
            omega_c=payload.get("omega_c"),
            m_segments=payload.get("m_segments"),
        )


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Nonnegative spectral density sampled on a grid. Values are read-only."""

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"values must have length {self.grid.n_points}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrum values must be finite")
        if np.any(values < 0):
            raise ValueError("spectrum values must be nonnegative")
        values[self.grid.omega > self.grid.omega_c * (1 + 1e-12)] = 0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    def scaled(self, factor: float) -> Spectrum:
        if factor < 0:
            raise ValueError("factor must be nonnegative")
        return Spectrum(self.grid, self.values * factor)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> Spectrum:
        return cls(FrequencyGrid.from_dict(payload["grid"]), np.asarray(payload["values"]))


@dataclass(frozen=True, eq=False)
class CurvatureVector:
    """Second differences Δ = D²S of a length-N spectrum (length N-2)."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("curvature values must be one-dimensional")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class QdSurrogateParams:
    """Lorentzian resonances plus an exponentially decaying background."""

    peak_centers: tuple[float, ...]
    peak_widths: tuple[float, ...]
    peak_heights: tuple[float, ...]
    background_amplitude: float = 0.0
    background_decay: float = 1.0

    def __post_init__(self) -> None:
        counts = {len(self.peak_centers), len(self.peak_widths), len(self.peak_heights)}
        if len(counts) != 1:
            raise ValueError("peak_centers, peak_widths and peak_heights must have equal length")
        if any(w <= 0 for w in self.peak_widths):
            raise ValueError("peak_widths must be positive")
        if any(h <= 0 for h in self.peak_heights):
            raise ValueError("peak_heights must be positive")
        if self.background_amplitude < 0:
            raise ValueError("background_amplitude must be nonnegative")
        if self.background_decay <= 0:
            raise ValueError("background_decay must be positive")


def default_quantum_dot_params(grid: FrequencyGrid) -> QdSurrogateParams:
    """Three narrow resonances across the band over a slowly decaying floor."""
    omega_c = grid.omega_c
    return QdSurrogateParams(
        peak_centers=(0.25 * omega_c, 0.5 * omega_c, 0.75 * omega_c),
        peak_widths=(0.02 * omega_c, 0.02 * omega_c, 0.02 * omega_c),
        peak_heights=(1.0, 0.6, 0.8),
        background_amplitude=0.2,
        background_decay=0.8 * omega_c,
    )


# GENERATORS ----------------------------------------------------------------------------


def make_sparse_spectrum(
    n_points: int,
    sparsity: int,
    seed: int,
    norm: float = 1.0,
    grid: FrequencyGrid | None = None,
) -> Spectrum:
    if sparsity < 1 or sparsity > n_points:
        raise ValueError(f"sparsity must be in [1, {n_points}], got {sparsity}")
    if norm <= 0:
        raise ValueError("norm must be positive")
    grid = _resolve_grid(n_points, grid)

    rng = np.random.default_rng(seed)
    support = rng.choice(n_points, size=sparsity, replace=False)
    magnitudes = rng.uniform(*SPARSE_MAGNITUDE_RANGE, size=sparsity)

    values = np.zeros(n_points)
    values[support] = magnitudes
    values *= norm / np.linalg.norm(values)
    return Spectrum(grid, values)


def make_piecewise_linear_spectrum(
    n_points: int,
    kinks: int,
    seed: int,
    grid: FrequencyGrid | None = None,
) -> Spectrum:
    """Continuous piecewise-linear, nonnegative, unit-norm spectrum.

    Each kink is a hinge ``c * max(0, n - k)`` centred on an interior point k, so
    D²S is nonzero exactly at the ``kinks`` chosen centres.
    """
    if kinks < 1 or kinks > n_points - 2:
        raise ValueError(f"kinks must be in [1, {n_points - 2}], got {kinks}")
    grid = _resolve_grid(n_points, grid)

    rng = np.random.default_rng(seed)
    centres = rng.choice(np.arange(1, n_points - 1), size=kinks, replace=False)
    slopes = rng.uniform(*KINK_SLOPE_RANGE, size=kinks) * rng.choice([-1.0, 1.0], size=kinks)
    initial_slope = rng.uniform(-1.0, 1.0)

    n = np.arange(n_points, dtype=float)
    values = initial_slope * n
    for centre, slope in zip(centres, slopes):
        values += slope * np.maximum(0.0, n - centre)

    # constant shifts leave D²S untouched
    values -= values.min()
    values /= np.linalg.norm(values)
    return Spectrum(grid, values)


def make_quantum_dot_surrogate(params: QdSurrogateParams, grid: FrequencyGrid) -> Spectrum:
    if not params.peak_centers and params.background_amplitude == 0:
        raise ValueError("surrogate needs at least one peak or a nonzero background")

    omega = grid.omega
    values = params.background_amplitude * np.exp(-omega / params.background_decay)
    for centre, width, height in zip(
        params.peak_centers, params.peak_widths, params.peak_heights
    ):
        values = values + height * width**2 / ((omega - centre) ** 2 + width**2)

    values[omega > grid.omega_c] = 0.0
    peak = values.max()
    if peak <= 0:
        raise ValueError("surrogate is identically zero on this grid")
    return Spectrum(grid, values / peak)


def ou_spectrum(omega: np.ndarray, variance: float, correlation_time: float) -> np.ndarray:
    """One-sided Lorentzian of Ornstein-Uhlenbeck noise, normalised so that
    chi = integral over (0, inf) of F*S for the survival convention used here."""
    omega = np.asarray(omega, dtype=float)
    return 4 * variance * correlation_time / (math.pi * (1 + (omega * correlation_time) ** 2))


# OPERATORS -----------------------------------------------------------------------------


def second_difference(spectrum: Spectrum | np.ndarray) -> CurvatureVector:
    values = _as_values(spectrum)
    if values.shape[0] < 3:
        raise ValueError("second_difference needs at least 3 points")
    return CurvatureVector(np.diff(values, n=2))


def second_difference_matrix(n_points: int) -> np.ndarray:
    """Dense (N-2)xN matrix D² with rows (.., 1, -2, 1, ..)."""
    if n_points < 3:
        raise ValueError("second_difference_matrix needs at least 3 points")
    return np.diff(np.eye(n_points), n=2, axis=0)


def integrate_curvature(
    delta: CurvatureVector | np.ndarray,
    boundary: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """Solve D²S = delta for S with S_1, S_N pinned to ``boundary``."""
    curvature = _as_values(delta)
    if curvature.ndim != 1:
        raise ValueError("delta must be one-dimensional")
    first, last = float(boundary[0]), float(boundary[1])
    interior = curvature.shape[0]
    if interior == 0:
        return np.array([first, last])

    rhs = curvature.copy()
    rhs[0] -= first
    rhs[-1] -= last
    solution = solve_banded((1, 1), _laplacian_bands(interior), rhs)
    return np.concatenate(([first], solution, [last]))


def integration_operator(
    n_points: int, boundary: tuple[float, float] = (0.0, 0.0)
) -> tuple[np.ndarray, np.ndarray]:
    """Return (P, q) with integrate_curvature(delta, boundary) == P @ delta + q."""
    if n_points < 3:
        raise ValueError("integration_operator needs at least 3 points")
    interior = n_points - 2
    columns = solve_banded((1, 1), _laplacian_bands(interior), np.eye(interior))
    operator = np.zeros((n_points, interior))
    operator[1:-1, :] = columns
    offset = integrate_curvature(np.zeros(interior), boundary)
    return operator, offset


def _laplacian_bands(size: int) -> np.ndarray:
    bands = np.zeros((3, size))
    bands[0, 1:] = 1.0
    bands[1, :] = -2.0
    bands[2, :-1] = 1.0
    return bands


# METRICS -------------------------------------------------------------------------------


def l2_error(
    estimate: Spectrum | np.ndarray,
    truth: Spectrum | np.ndarray,
    relative: bool = False,
) -> float:
    if isinstance(estimate, Spectrum) and isinstance(truth, Spectrum):
        if estimate.grid != truth.grid:
            raise ValueError("estimate and truth live on different grids")
    est, ref = _as_values(estimate), _as_values(truth)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")

    error = float(np.linalg.norm(est - ref))
    if relative:
        scale = float(np.linalg.norm(ref))
        if scale == 0:
            raise ValueError("relative error undefined for an all-zero truth")
        error /= scale
    return error


def support(spectrum: Spectrum | np.ndarray, threshold: float = NONZERO_THRESHOLD) -> np.ndarray:
    return np.flatnonzero(np.abs(_as_values(spectrum)) > threshold)


# IO ------------------------------------------------------------------------------------


def spectrum_to_frame(spectrum: Spectrum) -> pd.DataFrame:
    return pd.DataFrame({"omega": spectrum.omega, "value": spectrum.values})


def spectrum_from_frame(frame: pd.DataFrame, grid: FrequencyGrid) -> Spectrum:
    if not {"omega", "value"} <= set(frame.columns):
        raise ValueError("spectrum CSV must have omega and value columns")
    if not np.allclose(frame["omega"].to_numpy(), grid.omega, rtol=1e-9, atol=0):
        raise ValueError("CSV frequencies do not match the grid")
    return Spectrum(grid, frame["value"].to_numpy())


def write_spectrum_csv(spectrum: Spectrum, path: Path, config_hash: str | None = None) -> None:
    frame = spectrum_to_frame(spectrum)
    if config_hash is not None:
        frame["config_hash"] = config_hash
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info("Wrote spectrum CSV %s", path)


def _as_values(item: Spectrum | CurvatureVector | np.ndarray) -> np.ndarray:
    if isinstance(item, (Spectrum, CurvatureVector)):
        return item.values
    return np.asarray(item, dtype=float)


def _resolve_grid(n_points: int, grid: FrequencyGrid | None) -> FrequencyGrid:
    if grid is None:
        return FrequencyGrid.band(n_points)
    if grid.n_points != n_points:
        raise ValueError(f"grid has {grid.n_points} points, expected {n_points}")
    return grid
