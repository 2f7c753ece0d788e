from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from src.data_types.spectroscopy import MethodName, SpectrumFamily

from .control import (
    CpmgSequence,
    FourierEnsemble,
    PulseSequence,
    RademacherSequence,
    count_sign_changes,
    fourier_ensemble_signs,
)
from .forward import MeasurementMatrix, MeasurementRecord, build_measurement_matrix, simulate_record
from .reconstruction import ReconstructionService
from .solvers import ReconstructionResult
from .spectra import (
    FrequencyGrid,
    QdSurrogateParams,
    Spectrum,
    default_quantum_dot_params,
    l2_error,
    make_piecewise_linear_spectrum,
    make_quantum_dot_surrogate,
    make_sparse_spectrum,
)

logger = logging.getLogger("csqns.experiments")


@dataclass(frozen=True)
class SweepSpec:
    """Everything needed to regenerate a sweep bit-for-bit.

    ``k_values`` is K for compressed methods and N_set for CPMG. ``n_shots`` of
    None runs the noiseless forward model.
    """

    method: MethodName
    spectrum_family: SpectrumFamily
    k_values: tuple[int, ...]
    n_trials: int = 40
    n_points: int = 100
    tau: float = 1.0
    spectrum_params: dict = field(default_factory=dict)
    method_params: dict = field(default_factory=dict)
    n_shots: int | None = None
    chi_target: float = 0.5
    seed: int = 0
    relative_error: bool = True

    def __post_init__(self) -> None:
        if not self.k_values:
            raise ValueError("k_values must not be empty")
        if any(k < 0 for k in self.k_values):
            raise ValueError("k_values must be nonnegative")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.n_shots is not None and self.n_shots < 1:
            raise ValueError("n_shots must be at least 1")
        if self.chi_target <= 0:
            raise ValueError("chi_target must be positive")
        object.__setattr__(self, "method", MethodName(self.method))
        object.__setattr__(self, "spectrum_family", SpectrumFamily(self.spectrum_family))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.band(self.n_points, self.tau)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["spectrum_family"] = self.spectrum_family.value
        d["k_values"] = list(self.k_values)
        return d

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_(self, **changes) -> SweepSpec:
        return SweepSpec(**{**self.to_dict(), **changes})


@dataclass(frozen=True)
class TrialSeeds:
    spectrum: int
    sequences: int
    shots: int

    @classmethod
    def derive(cls, seed: int, trial: int) -> TrialSeeds:
        # independent of K so that designs and shot noise nest across a sweep
        state = np.random.SeedSequence([seed, trial]).generate_state(3)
        return cls(int(state[0]), int(state[1]), int(state[2]))


@dataclass
class ScenarioOutcome:
    truth: Spectrum
    sequences: list[PulseSequence]
    matrix: MeasurementMatrix
    record: MeasurementRecord
    result: ReconstructionResult
    amplitude: float
    error: float

    @property
    def estimate(self) -> np.ndarray:
        return self.result.spectrum_estimate / self.amplitude


def build_spectrum(
    family: SpectrumFamily | str,
    grid: FrequencyGrid,
    seed: int,
    params: dict,
) -> Spectrum:
    family = SpectrumFamily(family)
    if family == SpectrumFamily.SPARSE:
        return make_sparse_spectrum(
            grid.n_points,
            int(params.get("sparsity", 4)),
            seed,
            norm=float(params.get("norm", 1.0)),
            grid=grid,
        )
    if family == SpectrumFamily.PIECEWISE_LINEAR:
        return make_piecewise_linear_spectrum(
            grid.n_points, int(params.get("kinks", 4)), seed, grid=grid
        )

    qd = default_quantum_dot_params(grid)
    if params:
        qd = QdSurrogateParams(
            peak_centers=tuple(params.get("peak_centers", qd.peak_centers)),
            peak_widths=tuple(params.get("peak_widths", qd.peak_widths)),
            peak_heights=tuple(params.get("peak_heights", qd.peak_heights)),
            background_amplitude=float(
                params.get("background_amplitude", qd.background_amplitude)
            ),
            background_decay=float(params.get("background_decay", qd.background_decay)),
        )
    return make_quantum_dot_surrogate(qd, grid)


def chi_amplitude(matrix: MeasurementMatrix, truth: Spectrum, chi_target: float) -> float:
    """Factor that sets the mean noiseless decay exponent to ``chi_target``."""
    if matrix.n_rows == 0:
        return 1.0
    mean_chi = float(np.mean(matrix.design @ truth.values))
    if mean_chi <= 0:
        return 1.0
    return chi_target / mean_chi


def run_scenario(
    service: ReconstructionService,
    method: MethodName | str,
    truth: Spectrum,
    count: int,
    sequence_seed: int,
    shot_seed: int,
    method_params: dict,
    n_shots: int | None = None,
    chi_target: float = 0.5,
    relative_error: bool = True,
) -> ScenarioOutcome:
    """Design, measure and reconstruct one spectrum.

    With shot noise the spectrum is rescaled so the mean noiseless chi equals
    ``chi_target``; the estimate is divided by the same factor before scoring.
    """
    method = MethodName(method)
    sequences = service.design(method.value, truth.grid, count, sequence_seed, method_params)
    matrix = build_measurement_matrix(
        sequences, truth.grid, cpmg_ideal=bool(method_params.get("ideal_forward", False))
    )
    amplitude = chi_amplitude(matrix, truth, chi_target) if n_shots is not None else 1.0
    record = simulate_record(matrix, truth.scaled(amplitude), n_shots=n_shots, seed=shot_seed)
    result = service.reconstruct(method.value, matrix, record, method_params)
    error = l2_error(result.spectrum_estimate / amplitude, truth.values, relative=relative_error)
    return ScenarioOutcome(
        truth=truth,
        sequences=sequences,
        matrix=matrix,
        record=record,
        result=result,
        amplitude=amplitude,
        error=error,
    )


def run_trial(spec: SweepSpec, k: int, trial: int, service: ReconstructionService) -> dict:
    """One (spectrum, sequences, shots) draw at a sweep point; failures become rows."""
    seeds = TrialSeeds.derive(spec.seed, trial)
    row = {
        "k": k,
        "trial": trial,
        "error": math.nan,
        "converged": False,
        "iterations": 0,
        "pulses": math.nan,
        "clipped": 0,
        "status": "ok",
        "message": "",
    }
    try:
        truth = build_spectrum(spec.spectrum_family, spec.grid, seeds.spectrum, spec.spectrum_params)
        outcome = run_scenario(
            service,
            spec.method,
            truth,
            k,
            seeds.sequences,
            seeds.shots,
            spec.method_params,
            n_shots=spec.n_shots,
            chi_target=spec.chi_target,
            relative_error=spec.relative_error,
        )
    except Exception as exc:
        logger.exception("Trial %s at K=%s failed", trial, k)
        row.update(status="error", message=str(exc))
        return row

    row.update(
        error=outcome.error,
        converged=outcome.result.converged,
        iterations=outcome.result.iterations,
        pulses=mean_pulse_count(outcome.sequences),
        clipped=int(outcome.record.clipped.sum()),
    )
    if not outcome.result.converged:
        row["message"] = "solver did not converge"
    return row


def mean_pulse_count(sequences: list[PulseSequence]) -> float:
    counts: list[float] = []
    for seq in sequences:
        if isinstance(seq, RademacherSequence):
            counts.append(float(count_sign_changes(seq.signs)))
        elif isinstance(seq, FourierEnsemble):
            counts.append(float(count_sign_changes(fourier_ensemble_signs(seq)).mean()))
        elif isinstance(seq, CpmgSequence):
            counts.append(float(seq.n_pulses))
    return float(np.mean(counts)) if counts else math.nan
