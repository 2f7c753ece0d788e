from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .control import (
    CpmgSequence,
    FourierBasis,
    FourierEnsemble,
    PulseSequence,
    RademacherSequence,
    cpmg_filter,
    fourier_ensemble_realizations,
    fourier_filter_ideal,
    rademacher_filter,
)
from .spectra import FrequencyGrid, Spectrum

logger = logging.getLogger("csqns.forward")


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """K filter rows on a common grid.

    ``rows`` are filter values; the decay exponent is ``rows @ S * delta_omega``.
    ``realizations`` keeps the single-shot rows behind each averaged
    Fourier-ensemble row so shot noise can be drawn per realization; it is not
    serialized.
    """

    rows: np.ndarray = field(repr=False)
    row_meta: list[dict]
    delta_omega: float
    realizations: tuple[np.ndarray | None, ...] | None = field(default=None, repr=False)
    grid: FrequencyGrid | None = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("rows must be a K x N array")
        if rows.shape[0] != len(self.row_meta):
            raise ValueError(
                f"row count {rows.shape[0]} does not match meta count {len(self.row_meta)}"
            )
        if not np.all(np.isfinite(rows)):
            raise ValueError("filter rows must be finite")
        if self.delta_omega <= 0:
            raise ValueError("delta_omega must be positive")
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_points(self) -> int:
        return int(self.rows.shape[1])

    @property
    def design(self) -> np.ndarray:
        """Quadrature-weighted rows, so that chi = design @ S."""
        return self.rows * self.delta_omega


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    chi: np.ndarray
    chi_sigma: np.ndarray
    chi_noiseless: np.ndarray
    shots: int | None
    seeds: list[int]
    clipped: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.chi)):
            raise ValueError("chi entries must be finite")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be at least 1 when shot noise is enabled")

    @property
    def weights(self) -> np.ndarray | None:
        return measurement_weights(self.chi_sigma, self.shots)


@dataclass(frozen=True, eq=False)
class ToeplitzOperator:
    """Hermitian Toeplitz B(S) with entry (m, m') = S_hat[m - m'].

    ``coefficients[j]`` is S_hat_j = sum_n S'_n exp(i omega_n j tau) for
    j = 0..M-1, with S' = S * sinc²(omega*tau/2); negative lags are conjugates.
    """

    m_dim: int
    coefficients: np.ndarray = field(repr=False)
    tau: float = 1.0
    delta_omega: float = 1.0

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=complex)
        if coefficients.shape != (self.m_dim,):
            raise ValueError(f"coefficients must have length {self.m_dim}")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def first_row(self) -> np.ndarray:
        return np.conj(self.coefficients)

    @property
    def measurement_scale(self) -> float:
        """decay_exponent = measurement_scale * quadratic_measurement."""
        return 2 * math.pi * self.delta_omega

    def matrix(self) -> np.ndarray:
        return toeplitz(self.coefficients)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix())

    def nuclear_norm(self) -> float:
        return float(np.linalg.svd(self.matrix(), compute_uv=False).sum())


# MEASUREMENT PRIMITIVES ----------------------------------------------------------------


def decay_exponent(row: np.ndarray, spectrum: Spectrum) -> float:
    row = np.asarray(row, dtype=float)
    if row.shape != spectrum.values.shape:
        raise ValueError(f"row length {row.shape} does not match grid {spectrum.values.shape}")
    return float(row @ spectrum.values * spectrum.grid.delta_omega)


def survival_probability(chi: float | np.ndarray) -> float | np.ndarray:
    chi_arr = np.asarray(chi, dtype=float)
    if np.any(chi_arr < 0):
        raise ValueError("chi must be nonnegative")
    result = 0.5 + 0.5 * np.exp(-chi_arr)
    return float(result) if result.ndim == 0 else result


def sample_shots(
    probability: float | np.ndarray,
    n_shots: int,
    seed: int | np.random.Generator,
) -> float | np.ndarray:
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.binomial(n_shots, probability)
    result = np.asarray(counts, dtype=float) / n_shots
    return float(result) if result.ndim == 0 else result


def invert_probability(
    p_hat: float | np.ndarray, n_shots: int | None = None
) -> tuple[float | np.ndarray, bool | np.ndarray]:
    """chi = -ln(2P - 1) after clipping P into [0.5 + 1/(2 N2), 1].

    Without a shot count the floor is the smallest representable P above 0.5.
    """
    p_arr = np.asarray(p_hat, dtype=float)
    floor = 0.5 + 1.0 / (2 * n_shots) if n_shots else np.nextafter(0.5, 1.0)
    clipped = p_arr < floor
    chi = -np.log(2 * np.clip(p_arr, floor, 1.0) - 1)
    if chi.ndim == 0:
        return float(chi), bool(clipped)
    return chi, clipped


def chi_sigma(probability: float | np.ndarray, n_shots: int) -> float | np.ndarray:
    """Delta-method standard error of -ln(2P-1) estimated from N2 shots."""
    p_arr = np.asarray(probability, dtype=float)
    lower = 0.5 + 1.0 / (2 * n_shots)
    upper = max(1.0 - 1.0 / (2 * n_shots), lower)
    p_arr = np.clip(p_arr, lower, upper)
    sigma = 2 * np.sqrt(p_arr * (1 - p_arr) / n_shots) / (2 * p_arr - 1)
    return float(sigma) if sigma.ndim == 0 else sigma


def measurement_weights(sigma: np.ndarray, n_shots: int | None) -> np.ndarray | None:
    if n_shots is None:
        return None
    return 1.0 / np.maximum(np.asarray(sigma, dtype=float), 1.0 / n_shots) ** 2


# TOEPLITZ ------------------------------------------------------------------------------


def build_toeplitz(
    spectrum: Spectrum, m_dim: int | None = None, general: bool = False
) -> ToeplitzOperator:
    grid = spectrum.grid
    m_dim = grid.m_segments if m_dim is None else m_dim
    if not general:
        if not grid.is_circulant:
            raise ValueError("build_toeplitz needs a circulant grid unless general=True")
        if m_dim != grid.m_segments:
            raise ValueError(f"m_dim must equal the grid's {grid.m_segments} segments")

    weighted = spectrum.values * np.sinc(grid.omega * grid.tau / (2 * math.pi)) ** 2
    if grid.is_circulant and m_dim == grid.m_segments:
        # omega_n * tau = 2*pi*n/M, so the sum is an inverse DFT of S' with n = M at index 0
        coefficients = m_dim * np.fft.ifft(np.roll(weighted, 1))
    else:
        lags = np.arange(m_dim, dtype=float) * grid.tau
        coefficients = np.exp(1j * np.outer(lags, grid.omega)) @ weighted

    return ToeplitzOperator(
        m_dim=m_dim,
        coefficients=coefficients,
        tau=grid.tau,
        delta_omega=grid.delta_omega,
    )


def quadratic_measurement(
    signs: RademacherSequence | np.ndarray, operator: ToeplitzOperator
) -> float:
    """(tau²/2pi) U^T B U."""
    u = signs.signs if isinstance(signs, RademacherSequence) else np.asarray(signs)
    u = u.astype(float)
    if u.shape != (operator.m_dim,):
        raise ValueError(f"sign vector length {u.shape} does not match M={operator.m_dim}")
    value = np.real(u @ operator.matrix() @ u)
    return float(operator.tau**2 / (2 * math.pi) * value)


# ASSEMBLY ------------------------------------------------------------------------------


def build_measurement_matrix(
    sequences: list[PulseSequence],
    grid: FrequencyGrid,
    cpmg_ideal: bool = False,
) -> MeasurementMatrix:
    rows: list[np.ndarray] = []
    realizations: list[np.ndarray | None] = []
    meta: list[dict] = []

    for seq in sequences:
        single: np.ndarray | None = None
        if isinstance(seq, RademacherSequence):
            if seq.m_segments != grid.m_segments:
                logger.warning(
                    "Sequence has %s segments but grid expects %s",
                    seq.m_segments,
                    grid.m_segments,
                )
            row = rademacher_filter(seq, grid)
        elif isinstance(seq, FourierEnsemble):
            ensemble = fourier_ensemble_realizations(seq, grid)
            row, single = ensemble.mean_row, ensemble.rows
        elif isinstance(seq, FourierBasis):
            row = fourier_filter_ideal(seq.j_index, grid)
        elif isinstance(seq, CpmgSequence):
            row = cpmg_filter(seq, grid, ideal=cpmg_ideal)
        else:
            raise ValueError(f"unsupported sequence type {type(seq).__name__}")
        rows.append(row)
        realizations.append(single)
        meta.append(seq.to_dict(include_signs=False))

    matrix = np.vstack(rows) if rows else np.zeros((0, grid.n_points))
    return MeasurementMatrix(
        rows=matrix,
        row_meta=meta,
        delta_omega=grid.delta_omega,
        realizations=tuple(realizations),
        grid=grid,
    )


def simulate_record(
    matrix: MeasurementMatrix,
    spectrum: Spectrum,
    n_shots: int | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> MeasurementRecord:
    """Noiseless chi plus, when ``n_shots`` is set, the survival/shot/inversion path.

    Every row draws from its own generator seeded by (seed, row index), so the
    record does not depend on ``jobs``.
    """
    if matrix.n_points != spectrum.values.shape[0]:
        raise ValueError("measurement matrix and spectrum use different grids")
    noiseless = matrix.design @ spectrum.values
    row_seeds = [
        int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        for k in range(matrix.n_rows)
    ]

    if n_shots is None:
        return MeasurementRecord(
            chi=noiseless.copy(),
            chi_sigma=np.zeros(matrix.n_rows),
            chi_noiseless=noiseless,
            shots=None,
            seeds=row_seeds,
            clipped=np.zeros(matrix.n_rows, dtype=bool),
        )

    realizations = matrix.realizations or (None,) * matrix.n_rows
    for k, meta in enumerate(matrix.row_meta):
        if meta.get("type") == "fourier_basis":
            raise ValueError(f"row {k} is an idealized Fourier row; it cannot be shot-sampled")

    def measure(k: int) -> tuple[float, float, bool]:
        rng = np.random.default_rng(row_seeds[k])
        single = realizations[k]
        if single is None:
            chi_true = np.array([noiseless[k]])
        else:
            chi_true = single @ spectrum.values * matrix.delta_omega
        p_hat = sample_shots(survival_probability(chi_true), n_shots, rng)
        chi_hat, clipped = invert_probability(p_hat, n_shots)
        sigma = chi_sigma(p_hat, n_shots)
        count = chi_true.shape[0]
        return (
            float(np.mean(chi_hat)),
            float(np.sqrt(np.sum(np.square(sigma))) / count),
            bool(np.any(clipped)),
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            measured = list(pool.map(measure, range(matrix.n_rows)))
    else:
        measured = [measure(k) for k in range(matrix.n_rows)]

    chi = np.array([m[0] for m in measured])
    sigma = np.array([m[1] for m in measured])
    clipped = np.array([m[2] for m in measured], dtype=bool)
    if clipped.any():
        logger.warning(
            "%s of %s shot estimates were clipped at P = 0.5 + 1/(2*%s)",
            int(clipped.sum()),
            matrix.n_rows,
            n_shots,
        )
    return MeasurementRecord(
        chi=chi,
        chi_sigma=sigma,
        chi_noiseless=noiseless,
        shots=n_shots,
        seeds=row_seeds,
        clipped=clipped,
    )


def assemble_measurements(
    sequences: list[PulseSequence],
    spectrum: Spectrum,
    n_shots: int | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[MeasurementMatrix, MeasurementRecord]:
    matrix = build_measurement_matrix(sequences, spectrum.grid)
    record = simulate_record(matrix, spectrum, n_shots=n_shots, seed=seed, jobs=jobs)
    return matrix, record


# BUNDLE --------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementBundle:
    """A matrix and its record, plus the unscaled truth when it is known.

    ``amplitude`` is the factor the truth was multiplied by before measuring.
    """

    matrix: MeasurementMatrix
    record: MeasurementRecord
    truth: Spectrum | None = None
    amplitude: float = 1.0
    method: str | None = None

    @property
    def grid(self) -> FrequencyGrid:
        if self.matrix.grid is not None:
            return self.matrix.grid
        if self.truth is not None:
            return self.truth.grid
        raise ValueError("bundle has no frequency grid")

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "delta_omega": self.matrix.delta_omega,
            "row_meta": self.matrix.row_meta,
            "F": self.matrix.rows.tolist(),
            "chi": self.record.chi.tolist(),
            "chi_noiseless": self.record.chi_noiseless.tolist(),
            "chi_sigma": self.record.chi_sigma.tolist(),
            "clipped": self.record.clipped.tolist(),
            "shots": self.record.shots,
            "seeds": list(self.record.seeds),
            "truth": None if self.truth is None else self.truth.values.tolist(),
            "amplitude": self.amplitude,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> MeasurementBundle:
        grid = FrequencyGrid.from_dict(payload["grid"])
        rows = np.asarray(payload["F"], dtype=float).reshape(-1, grid.n_points)
        n_rows = rows.shape[0]
        for key in ("chi", "chi_noiseless", "chi_sigma", "clipped", "seeds"):
            if len(payload[key]) != n_rows:
                raise ValueError(
                    f"bundle field {key!r} has {len(payload[key])} entries, expected {n_rows}"
                )
        matrix = MeasurementMatrix(
            rows=rows,
            row_meta=list(payload["row_meta"]),
            delta_omega=float(payload["delta_omega"]),
            grid=grid,
        )
        record = MeasurementRecord(
            chi=np.asarray(payload["chi"], dtype=float),
            chi_sigma=np.asarray(payload["chi_sigma"], dtype=float),
            chi_noiseless=np.asarray(payload["chi_noiseless"], dtype=float),
            shots=payload.get("shots"),
            seeds=[int(s) for s in payload["seeds"]],
            clipped=np.asarray(payload["clipped"], dtype=bool),
        )
        truth = payload.get("truth")
        return cls(
            matrix=matrix,
            record=record,
            truth=None if truth is None else Spectrum(grid, np.asarray(truth, dtype=float)),
            amplitude=float(payload.get("amplitude", 1.0)),
            method=payload.get("method"),
        )
