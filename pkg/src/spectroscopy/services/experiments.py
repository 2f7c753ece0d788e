from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import metadata

import numpy as np
import pandas as pd
from scipy import stats
from scipy.optimize import isotonic_regression

from src.data_types.spectroscopy import MethodName

from .control import FourierBasis, count_sign_changes, expected_pulse_count
from .forward import build_measurement_matrix
from .solvers import SolverConfig, lambda_max, solve_curvature_l1, solve_tgv
from .spectra import FrequencyGrid, l2_error, make_piecewise_linear_spectrum
from .trials import SweepSpec, run_trial

logger = logging.getLogger("csqns.experiments")

CONFIDENCE = 0.95
KC_THRESHOLD = 0.5
QD_THRESHOLD = 0.1
TRIAL_COLUMNS = [
    "k",
    "trial",
    "error",
    "converged",
    "iterations",
    "pulses",
    "clipped",
    "status",
    "message",
]


def code_version() -> str:
    try:
        return metadata.version("cs-noise-spectroscopy")
    except metadata.PackageNotFoundError:
        return "0.1.0"


@dataclass
class SweepResult:
    """Raw per-trial rows plus the spec that regenerates them."""

    spec: dict
    trials: pd.DataFrame
    spec_hash: str
    version: str

    @property
    def summary(self) -> pd.DataFrame:
        rows = []
        for k, group in self.trials.groupby("k", sort=True):
            errors = group.loc[group["status"] == "ok", "error"].to_numpy(dtype=float)
            rows.append(
                {
                    "k": int(k),
                    "mean_error": float(errors.mean()) if errors.size else math.nan,
                    "half_width": confidence_half_width(errors),
                    "n_trials": int(errors.size),
                    "n_failed": int((group["status"] != "ok").sum()),
                    "n_unconverged": int((~group["converged"].astype(bool)).sum()),
                    "mean_pulses": float(group["pulses"].mean()),
                }
            )
        return pd.DataFrame(rows)

    @property
    def k_values(self) -> np.ndarray:
        return self.summary["k"].to_numpy()

    @property
    def mean_errors(self) -> np.ndarray:
        return self.summary["mean_error"].to_numpy()

    def to_dict(self) -> dict:
        summary = self.summary
        return {
            "spec": self.spec,
            "spec_hash": self.spec_hash,
            "code_version": self.version,
            "points": summary.to_dict(orient="records"),
        }


@dataclass
class FitReport:
    coefficients: list[float]
    r_squared: float
    rss: float


@dataclass
class ScalingReport:
    linear_in_s: FitReport
    quadratic_in_log_n: FitReport
    linear_in_log_n: FitReport

    @property
    def quadratic_preferred(self) -> bool:
        return self.quadratic_in_log_n.rss < self.linear_in_log_n.rss

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quadratic_preferred"] = self.quadratic_preferred
        return d


@dataclass
class PulseBudgetPoint:
    p: float
    sweep: SweepResult
    empirical_pulses: float
    expected_pulses: float

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "empirical_pulses": self.empirical_pulses,
            "expected_pulses": self.expected_pulses,
            "critical_n_set": critical_k(self.sweep, QD_THRESHOLD),
        }


@dataclass
class CurvatureComparison:
    curvature_errors: list[float]
    tgv_errors: list[float]

    @property
    def tgv_win_rate(self) -> float:
        wins = [c >= t for c, t in zip(self.curvature_errors, self.tgv_errors)]
        return float(np.mean(wins)) if wins else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tgv_win_rate"] = self.tgv_win_rate
        return d


# SWEEPS --------------------------------------------------------------------------------


def accuracy_vs_k(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Run n_trials independent draws at every K and collect the errors.

    Trial seeds depend only on (seed, trial), so results do not depend on
    ``jobs`` or on scheduling order.
    """
    tasks = [(spec, k, trial) for k in spec.k_values for trial in range(spec.n_trials)]
    logger.info(
        "Sweep %s on %s: %s points x %s trials",
        spec.method.value,
        spec.spectrum_family.value,
        len(spec.k_values),
        spec.n_trials,
    )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_run_task(task) for task in tasks]

    trials = pd.DataFrame(rows, columns=TRIAL_COLUMNS).sort_values(["k", "trial"], kind="stable")
    result = SweepResult(
        spec=spec.to_dict(),
        trials=trials.reset_index(drop=True),
        spec_hash=spec.fingerprint(),
        version=code_version(),
    )
    failed = int((trials["status"] != "ok").sum())
    if failed:
        logger.warning("%s of %s trials failed", failed, len(trials))
    return result


def _run_task(task: tuple[SweepSpec, int, int]) -> dict:
    from src.spectroscopy.methods import build_method_registry
    from .reconstruction import ReconstructionService

    spec, k, trial = task
    service = ReconstructionService(build_method_registry())
    return run_trial(spec, k, trial, service)


def confidence_half_width(errors: np.ndarray, confidence: float = CONFIDENCE) -> float:
    errors = np.asarray(errors, dtype=float)
    n = errors.size
    if n < 2:
        return math.nan
    quantile = stats.t.ppf(0.5 + confidence / 2, df=n - 1)
    return float(quantile * errors.std(ddof=1) / math.sqrt(n))


def critical_k(result: SweepResult, threshold: float = KC_THRESHOLD) -> int | None:
    return critical_k_from_means(result.k_values, result.mean_errors, threshold)


def critical_k_from_means(
    k_values: Sequence[int], means: Sequence[float], threshold: float = KC_THRESHOLD
) -> int | None:
    """Smallest K whose mean error is below ``threshold``."""
    for k, mean in sorted(zip(k_values, means)):
        if mean < threshold:
            return int(k)
    return None


def kc_scaling(
    kc_by_sparsity: Mapping[int, float], kc_by_size: Mapping[int, float]
) -> ScalingReport:
    """Fit K_c = a*s + b, and K_c against log N with a quadratic and a line."""
    if len(set(kc_by_sparsity)) < 4:
        raise ValueError("kc_scaling needs at least 4 distinct sparsities")
    if len(set(kc_by_size)) < 4:
        raise ValueError("kc_scaling needs at least 4 distinct grid sizes")

    s = np.array(sorted(kc_by_sparsity), dtype=float)
    kc_s = np.array([kc_by_sparsity[int(v)] for v in s], dtype=float)
    sizes = np.array(sorted(kc_by_size), dtype=float)
    kc_n = np.array([kc_by_size[int(v)] for v in sizes], dtype=float)
    log_n = np.log(sizes)

    return ScalingReport(
        linear_in_s=_polyfit(s, kc_s, 1),
        quadratic_in_log_n=_polyfit(log_n, kc_n, 2),
        linear_in_log_n=_polyfit(log_n, kc_n, 1),
    )


def kc_scaling_study(
    base: SweepSpec,
    sparsities: Sequence[int],
    sizes: Sequence[int],
    fixed_sparsity: int = 2,
    threshold: float = KC_THRESHOLD,
    jobs: int = 1,
) -> tuple[ScalingReport, dict[str, SweepResult]]:
    sweeps: dict[str, SweepResult] = {}
    kc_s: dict[int, float] = {}
    kc_n: dict[int, float] = {}
    for s in sparsities:
        params = {**base.spectrum_params, "sparsity": s}
        sweep = accuracy_vs_k(base.with_(spectrum_params=params), jobs=jobs)
        sweeps[f"s={s}"] = sweep
        kc_s[s] = _require_crossing(critical_k(sweep, threshold), f"s={s}")
    for n in sizes:
        params = {**base.spectrum_params, "sparsity": fixed_sparsity}
        sweep = accuracy_vs_k(base.with_(n_points=n, spectrum_params=params), jobs=jobs)
        sweeps[f"N={n}"] = sweep
        kc_n[n] = _require_crossing(critical_k(sweep, threshold), f"N={n}")
    return kc_scaling(kc_s, kc_n), sweeps


def qd_comparison(
    base: SweepSpec,
    n_set_values: Sequence[int],
    methods: Sequence[MethodName | str] = (MethodName.CS_TGV, MethodName.CS_R_TGV, MethodName.CPMG),
    method_params: Mapping[str, dict] | None = None,
    jobs: int = 1,
) -> dict[str, SweepResult]:
    """The same surrogate and grid under each method, indexed by N_set.

    N_set is K for the compressed methods and the number of CPMG sequences
    for the band scan.
    """
    method_params = method_params or {}
    results: dict[str, SweepResult] = {}
    for method in methods:
        name = MethodName(method).value
        params = {**base.method_params, **method_params.get(name, {})}
        spec = base.with_(method=name, k_values=tuple(n_set_values), method_params=params)
        results[name] = accuracy_vs_k(spec, jobs=jobs)
    return results


def transition_width(
    k_values: Sequence[int],
    means: Sequence[float],
    upper: float = 0.8,
    lower: float = 0.2,
) -> int | None:
    """K span over which the mean error falls from upper to lower times its initial value."""
    ordered = sorted(zip(k_values, means))
    if not ordered:
        return None
    initial = ordered[0][1]
    k_upper = next((k for k, m in ordered if m <= upper * initial), None)
    k_lower = next((k for k, m in ordered if m <= lower * initial), None)
    if k_upper is None or k_lower is None:
        return None
    return int(k_lower - k_upper)


def pulse_budget_study(
    p_values: Sequence[float], base: SweepSpec, jobs: int = 1
) -> dict[float, PulseBudgetPoint]:
    if any(not 0 < p < 1 for p in p_values):
        raise ValueError("every p must lie in (0, 1)")
    points: dict[float, PulseBudgetPoint] = {}
    for p in p_values:
        params = {**base.method_params, "p": p}
        sweep = accuracy_vs_k(base.with_(method_params=params), jobs=jobs)
        ok = sweep.trials[sweep.trials["status"] == "ok"]
        points[p] = PulseBudgetPoint(
            p=p,
            sweep=sweep,
            empirical_pulses=float(ok["pulses"].mean()) if len(ok) else math.nan,
            expected_pulses=expected_pulse_count(base.n_points, p),
        )
        logger.info(
            "p=%s: %.2f pulses per sequence (expected %.2f)",
            p,
            points[p].empirical_pulses,
            points[p].expected_pulses,
        )
    return points


def empirical_pulse_count(
    m_segments: int, p: float, n_seeds: int = 10_000, seed: int = 0, cyclic: bool = True
) -> tuple[float, float]:
    """Mean and standard error of the pulse count over ``n_seeds`` sequences.

    Counts are per period of the repeated sequence unless ``cyclic`` is off;
    the periodic count has mean 2Mp(1-p) exactly, a single shot 2(M-1)p(1-p).
    """
    rng = np.random.default_rng(seed)
    signs = np.where(rng.random((n_seeds, m_segments)) < p, 1, -1)
    counts = count_sign_changes(signs, cyclic=cyclic).astype(float)
    spread = counts.std(ddof=1) if n_seeds > 1 else 0.0
    return float(counts.mean()), float(spread / math.sqrt(n_seeds))


def curvature_vs_tgv(
    n_instances: int = 50,
    n_points: int = 100,
    count: int = 40,
    kinks: int = 4,
    noise_level: float = 0.02,
    seed: int = 0,
    lambda_rel: float = 1e-3,
) -> CurvatureComparison:
    """Head-to-head on noisy ideal Fourier rows.

    The curvature path integrates with the customary S_1 = S_N = 0 anchors; TGV
    estimates the affine part from the data. Noise is Gaussian with standard
    deviation ``noise_level`` times the RMS decay exponent.
    """
    grid = FrequencyGrid.band(n_points)
    curvature_errors: list[float] = []
    tgv_errors: list[float] = []
    for instance in range(n_instances):
        state = np.random.SeedSequence([seed, instance]).generate_state(3)
        truth = make_piecewise_linear_spectrum(n_points, kinks, int(state[0]), grid=grid)
        values = truth.values

        rng = np.random.default_rng(int(state[1]))
        indices = [int(j) for j in rng.permutation(np.arange(1, n_points + 1))[:count]]
        matrix = build_measurement_matrix([FourierBasis(j, n_points) for j in indices], grid)
        clean = matrix.design @ values
        noise = np.random.default_rng(int(state[2])).standard_normal(count)
        chi = clean + noise_level * math.sqrt(float(np.mean(clean**2))) * noise

        lam = lambda_max(matrix, chi) * lambda_rel
        cfg = SolverConfig(lam=lam, nonneg=False)
        curvature = solve_curvature_l1(matrix, chi, indices, cfg, grid=grid)
        tgv = solve_tgv(matrix, chi, cfg.with_(nonneg=True))
        scale = float(np.linalg.norm(values))
        curvature_errors.append(l2_error(curvature.spectrum_estimate, values) / scale)
        tgv_errors.append(l2_error(tgv.spectrum_estimate, values) / scale)
    return CurvatureComparison(curvature_errors=curvature_errors, tgv_errors=tgv_errors)


def isotonic_deviation(result: SweepResult) -> float:
    """Largest gap between the mean errors and their best non-increasing fit."""
    means = result.mean_errors
    finite = np.isfinite(means)
    if finite.sum() < 2:
        return 0.0
    fitted = isotonic_regression(means[finite], increasing=False).x
    return float(np.max(np.abs(fitted - means[finite])))


def _polyfit(x: np.ndarray, y: np.ndarray, degree: int) -> FitReport:
    coefficients = np.polyfit(x, y, degree)
    fitted = np.polyval(coefficients, x)
    rss = float(np.sum((y - fitted) ** 2))
    tss = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0
    return FitReport(coefficients=coefficients.tolist(), r_squared=r_squared, rss=rss)


def _require_crossing(kc: int | None, label: str) -> int:
    if kc is None:
        raise ValueError(f"sweep {label} never crossed the threshold; extend k_values")
    return kc


__all__ = [
    "CurvatureComparison",
    "FitReport",
    "PulseBudgetPoint",
    "ScalingReport",
    "SweepResult",
    "accuracy_vs_k",
    "confidence_half_width",
    "critical_k",
    "critical_k_from_means",
    "curvature_vs_tgv",
    "empirical_pulse_count",
    "isotonic_deviation",
    "kc_scaling",
    "kc_scaling_study",
    "pulse_budget_study",
    "qd_comparison",
    "transition_width",
]
