from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import nnls

from src.data_types.spectroscopy import SolverProgram

from .forward import MeasurementMatrix
from .spectra import FrequencyGrid, integration_operator, second_difference_matrix

logger = logging.getLogger("csqns.solvers")

RHO_UPDATE_EVERY = 10
RHO_ADAPT_UNTIL = 2_000
RESIDUAL_RATIO = 10.0
RHO_RANGE = 1e6
POLISH_EVERY = 25
POLISH_STEPS = 20
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Weights and stopping rule shared by every convex program.

    ``lam`` drives the single-penalty programs (L1, TGV, curvature);
    ``lam1``/``lam2`` drive the combined program. ``rho`` is relative to the
    mean squared column norm of the weighted design. ``penalty_weights``
    rescales the L1 penalty per grid point.
    """

    lam: float = 0.0
    lam1: float = 0.0
    lam2: float = 0.0
    rho: float = 1.0
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    max_iter: int = 20_000
    nonneg: bool = True
    weights: np.ndarray | None = field(default=None, repr=False)
    adaptive_rho: bool = True
    penalty_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if min(self.lam, self.lam1, self.lam2) < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float)
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise ValueError("weights must be finite and nonnegative")
            object.__setattr__(self, "weights", weights)
        if self.penalty_weights is not None:
            penalty = np.asarray(self.penalty_weights, dtype=float)
            if np.any(penalty < 0) or not np.all(np.isfinite(penalty)):
                raise ValueError("penalty weights must be finite and nonnegative")
            object.__setattr__(self, "penalty_weights", penalty)

    def with_(self, **changes) -> SolverConfig:
        return replace(self, **changes)


@dataclass
class ReconstructionResult:
    spectrum_estimate: np.ndarray
    objective_trace: list[float]
    converged: bool
    iterations: int
    lambda_used: dict[str, float]
    program: str
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    curvature_estimate: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spectrum_estimate"] = self.spectrum_estimate.tolist()
        if self.curvature_estimate is not None:
            d["curvature_estimate"] = self.curvature_estimate.tolist()
        return d


@dataclass
class CrossValidationResult:
    selected: float | tuple[float, float]
    candidates: list[float | tuple[float, float]]
    scores: list[float]

    def to_dict(self) -> dict:
        return asdict(self)


# PROGRAMS ------------------------------------------------------------------------------


def solve_l1(
    F: MeasurementMatrix | np.ndarray, chi: np.ndarray, cfg: SolverConfig
) -> ReconstructionResult:
    """argmin ½‖W^½(FS - chi)‖² + lam‖S‖₁, optionally with S >= 0."""
    return _admm(_design(F), chi, cfg.lam, 0.0, cfg, SolverProgram.L1)


def solve_reweighted_l1(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    cfg: SolverConfig,
    steps: int = 4,
    epsilon_rel: float = 0.1,
) -> ReconstructionResult:
    """L1 solves repeated with penalty eps / (|S_n| + eps) from the previous pass.

    eps is ``epsilon_rel`` times the largest entry of the previous estimate, so
    points already carrying mass are penalised less on the next pass. With
    ``steps=0`` this is solve_l1.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if epsilon_rel <= 0:
        raise ValueError("epsilon_rel must be positive")
    design = _design(F)
    base = cfg.penalty_weights if cfg.penalty_weights is not None else 1.0

    result = _admm(design, chi, cfg.lam, 0.0, cfg, SolverProgram.L1)
    iterations, converged = result.iterations, result.converged
    trace = list(result.objective_trace)
    for _ in range(steps):
        magnitude = np.abs(result.spectrum_estimate)
        peak = float(magnitude.max(initial=0.0))
        if peak == 0:
            break
        epsilon = epsilon_rel * peak
        penalty = base * epsilon / (magnitude + epsilon)
        result = _admm(
            design, chi, cfg.lam, 0.0, cfg.with_(penalty_weights=penalty), SolverProgram.L1
        )
        iterations += result.iterations
        converged = converged and result.converged
        trace.extend(result.objective_trace)

    logger.debug("Reweighted L1 finished after %s iterations in total", iterations)
    result.iterations = iterations
    result.converged = converged
    result.objective_trace = trace
    return result


def solve_tgv(
    F: MeasurementMatrix | np.ndarray, chi: np.ndarray, cfg: SolverConfig
) -> ReconstructionResult:
    """argmin ½‖W^½(FS - chi)‖² + lam‖D²S‖₁, optionally with S >= 0."""
    design = _design(F)
    if design.shape[1] < 3:
        raise ValueError("TGV needs at least 3 grid points")
    return _admm(design, chi, 0.0, cfg.lam, cfg, SolverProgram.TGV)


def solve_l1_tgv(
    F: MeasurementMatrix | np.ndarray, chi: np.ndarray, cfg: SolverConfig
) -> ReconstructionResult:
    design = _design(F)
    if design.shape[1] < 3:
        raise ValueError("TGV needs at least 3 grid points")
    return _admm(design, chi, cfg.lam1, cfg.lam2, cfg, SolverProgram.L1_TGV)


def solve_curvature_l1(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    j_indices: list[int],
    cfg: SolverConfig,
    grid: FrequencyGrid | None = None,
    boundary: tuple[float, float] = (0.0, 0.0),
) -> ReconstructionResult:
    """Recover Δ = D²S by L1 and integrate back to S.

    S = P Δ + q encodes the boundary anchors exactly. Row k is rescaled by the
    discrete Laplacian eigenvalue |2 cos(j_k Δω τ) - 2| of its cosine row and
    rows where it vanishes are dropped. Double integration amplifies
    low-frequency error, so prefer solve_tgv on noisy data.
    """
    design = _design(F)
    chi = np.asarray(chi, dtype=float)
    grid = grid if grid is not None else getattr(F, "grid", None)
    if grid is None:
        raise ValueError("solve_curvature_l1 needs the frequency grid of the rows")
    if len(j_indices) != design.shape[0]:
        raise ValueError("j_indices must have one entry per measurement row")

    step = grid.delta_omega * grid.tau
    eigen = np.abs(2 * np.cos(np.asarray(j_indices, dtype=float) * step) - 2)
    keep = eigen > 1e-12
    if not keep.any():
        raise ValueError("every row has j_k = 0; the curvature program has no data")
    if not keep.all():
        logger.warning("Dropping %s rows with zero Laplacian eigenvalue", int((~keep).sum()))

    operator, offset = integration_operator(design.shape[1], boundary)
    scaled_design = eigen[keep, None] * (design[keep] @ operator)
    scaled_chi = eigen[keep] * (chi[keep] - design[keep] @ offset)
    weights = None if cfg.weights is None else cfg.weights[keep]

    result = _admm(
        scaled_design,
        scaled_chi,
        cfg.lam,
        0.0,
        cfg.with_(nonneg=False, weights=weights),
        SolverProgram.CURVATURE,
    )
    curvature = result.spectrum_estimate
    result.curvature_estimate = curvature
    result.spectrum_estimate = operator @ curvature + offset
    return result


def solve_nnls(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    weights: np.ndarray | None = None,
) -> ReconstructionResult:
    design = _design(F)
    chi = np.asarray(chi, dtype=float)
    if weights is not None:
        root = np.sqrt(np.asarray(weights, dtype=float))
        design, chi = design * root[:, None], chi * root

    converged = True
    try:
        if design.shape[0] == 0:
            estimate = np.zeros(design.shape[1])
        else:
            estimate, _ = nnls(design, chi, maxiter=50 * design.shape[1])
    except RuntimeError as exc:
        logger.warning("NNLS stopped early: %s", exc)
        estimate = np.maximum(np.linalg.lstsq(design, chi, rcond=None)[0], 0.0)
        converged = False

    return ReconstructionResult(
        spectrum_estimate=estimate,
        objective_trace=[objective(design, chi, estimate)],
        converged=converged,
        iterations=1,
        lambda_used={},
        program=SolverProgram.NNLS.value,
    )


# DIAGNOSTICS ---------------------------------------------------------------------------


def objective(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    estimate: np.ndarray,
    lam1: float = 0.0,
    lam2: float = 0.0,
    weights: np.ndarray | None = None,
    penalty_weights: np.ndarray | None = None,
) -> float:
    design = _design(F)
    residual = design @ estimate - np.asarray(chi, dtype=float)
    if weights is not None:
        residual = residual * np.sqrt(weights)
    value = 0.5 * float(residual @ residual)
    if lam1:
        penalty = 1.0 if penalty_weights is None else penalty_weights
        value += lam1 * float(np.sum(penalty * np.abs(estimate)))
    if lam2:
        value += lam2 * float(np.abs(np.diff(estimate, n=2)).sum())
    return value


def kkt_residual(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    estimate: np.ndarray,
    lam: float,
    nonneg: bool = True,
    weights: np.ndarray | None = None,
    penalty_weights: np.ndarray | None = None,
) -> float:
    """Largest violation of the L1 optimality conditions at ``estimate``.

    On the support the gradient must equal -t*sign(S); off the support
    |grad| <= t (free) or grad >= -t (nonnegative), with t = lam * penalty.
    """
    design = _design(F)
    estimate = np.asarray(estimate, dtype=float)
    residual = design @ estimate - np.asarray(chi, dtype=float)
    if weights is not None:
        residual = residual * weights
    grad = design.T @ residual
    if nonneg and np.any(estimate < 0):
        return float("inf")
    threshold = lam * (1.0 if penalty_weights is None else np.asarray(penalty_weights))
    violations = _kkt_violations(grad, estimate, threshold, nonneg)
    return float(violations.max()) if violations.size else 0.0


def lambda_max(F: MeasurementMatrix | np.ndarray, chi: np.ndarray) -> float:
    """‖F^T chi‖∞, the smallest L1 weight whose solution is S = 0."""
    return float(np.max(np.abs(_design(F).T @ np.asarray(chi, dtype=float)), initial=0.0))


def lambda_grid(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    n: int = 30,
    lo: float = 1e-5,
    hi: float = 1e1,
) -> list[float]:
    scale = lambda_max(F, chi)
    if scale == 0:
        raise ValueError("F^T chi is zero; the lambda grid has no scale")
    return (scale * np.geomspace(lo, hi, n)).tolist()


def cross_validate(
    F: MeasurementMatrix | np.ndarray,
    chi: np.ndarray,
    grid: list[float] | list[tuple[float, float]],
    folds: int = 5,
    seed: int = 0,
    program: SolverProgram | str = SolverProgram.L1,
    cfg: SolverConfig | None = None,
    jobs: int = 1,
) -> CrossValidationResult:
    """K-fold selection of the weight(s) minimising mean held-out ‖chi - F S‖².

    Scores tying within a relative 1e-12 resolve to the strongest regularization.
    """
    design = _design(F)
    chi = np.asarray(chi, dtype=float)
    program = SolverProgram(program)
    n_rows = design.shape[0]
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if n_rows < folds:
        raise ValueError(f"{n_rows} measurements cannot be split into {folds} folds")
    if not grid:
        raise ValueError("lambda grid is empty")

    cfg = cfg or SolverConfig()
    order = np.random.default_rng(seed).permutation(n_rows)
    splits = np.array_split(order, folds)

    def score(candidate) -> float:
        total = 0.0
        for held_out in splits:
            train = np.setdiff1d(order, held_out)
            fold_cfg = _with_candidate(cfg, program, candidate)
            if fold_cfg.weights is not None:
                fold_cfg = fold_cfg.with_(weights=cfg.weights[train])
            result = _solve(program, design[train], chi[train], fold_cfg)
            residual = chi[held_out] - design[held_out] @ result.spectrum_estimate
            total += float(residual @ residual)
        return total / folds

    candidates = list(grid)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(score, candidates))
    else:
        scores = [score(c) for c in candidates]

    best = min(scores)
    tied = [c for c, s in zip(candidates, scores) if s <= best * (1 + TIE_TOLERANCE)]
    selected = max(tied, key=_strength)
    logger.info("Cross-validation selected %s (score %.6g)", selected, best)
    return CrossValidationResult(selected=selected, candidates=candidates, scores=scores)


# ADMM CORE -----------------------------------------------------------------------------


def _admm(
    design: np.ndarray,
    chi: np.ndarray,
    lam1: float,
    lam2: float,
    cfg: SolverConfig,
    program: SolverProgram,
) -> ReconstructionResult:
    """ADMM on ½‖W^½(FS - chi)‖² + lam1‖p∘S‖₁ + lam2‖D²S‖₁ (+ S >= 0).

    Splitting z = G S with G stacking I (when an L1 weight or nonnegativity is
    active) and D² (when lam2 > 0). The x-update reuses a Cholesky factor that is
    refreshed whenever residual balancing changes rho. Without the D² block the
    support of z seeds a short active-set solve every few iterations, accepted
    once the optimality conditions hold at every grid point.
    """
    chi = np.asarray(chi, dtype=float)
    if design.shape[0] != chi.shape[0]:
        raise ValueError(f"F has {design.shape[0]} rows but chi has {chi.shape[0]} entries")
    n_points = design.shape[1]
    weights = cfg.weights
    lambda_used = {"lambda1": lam1, "lambda2": lam2}

    if weights is not None:
        if weights.shape[0] != design.shape[0]:
            raise ValueError("weights must have one entry per measurement")
        root = np.sqrt(weights)
        weighted_design, weighted_chi = design * root[:, None], chi * root
    else:
        weighted_design, weighted_chi = design, chi

    penalty = cfg.penalty_weights
    if penalty is not None and penalty.shape[0] != n_points:
        raise ValueError("penalty_weights must have one entry per grid point")
    thresholds = lam1 * (np.ones(n_points) if penalty is None else penalty)

    use_identity = lam1 > 0 or cfg.nonneg
    use_curvature = lam2 > 0
    polish = use_identity and not use_curvature

    def evaluate(estimate: np.ndarray) -> float:
        return objective(
            weighted_design, weighted_chi, estimate, lam1, lam2, penalty_weights=penalty
        )

    if not (use_identity or use_curvature):
        estimate = np.linalg.lstsq(weighted_design, weighted_chi, rcond=None)[0]
        return ReconstructionResult(
            spectrum_estimate=estimate,
            objective_trace=[evaluate(estimate)],
            converged=True,
            iterations=0,
            lambda_used=lambda_used,
            program=program.value,
        )

    blocks = []
    if use_identity:
        blocks.append(np.eye(n_points))
    if use_curvature:
        blocks.append(second_difference_matrix(n_points))
    G = np.vstack(blocks)
    split = n_points if use_identity else 0

    gram = weighted_design.T @ weighted_design
    rhs = weighted_design.T @ weighted_chi
    gtg = G.T @ G
    scale = float(np.mean(np.diag(gram))) or 1.0
    rho = cfg.rho * scale
    factor = _factorize(gram, gtg, rho)

    floor_primal = float(np.linalg.norm(rhs)) / scale
    floor_dual = float(np.linalg.norm(rhs))
    rho_min, rho_max = rho / RHO_RANGE, rho * RHO_RANGE
    kkt_slack = cfg.tol_dual * max(
        float(np.max(np.abs(rhs), initial=0.0)), float(np.max(thresholds, initial=0.0))
    )
    max_support = 0
    if polish and design.shape[0]:
        max_support = int(np.linalg.matrix_rank(weighted_design))

    x = np.zeros(n_points)
    z = np.zeros(G.shape[0])
    u = np.zeros(G.shape[0])
    trace: list[float] = []
    converged = False
    polished: np.ndarray | None = None
    primal = dual = 0.0
    iteration = 0

    for iteration in range(1, cfg.max_iter + 1):
        x = cho_solve(factor, rhs + rho * G.T @ (z - u))
        gx = G @ x
        v = gx + u
        z_old = z
        z = np.empty_like(v)
        if use_identity:
            z[:split] = _prox_identity(v[:split], thresholds / rho, cfg.nonneg)
        if use_curvature:
            z[split:] = _soft_threshold(v[split:], lam2 / rho)
        u = u + gx - z

        primal = float(np.linalg.norm(gx - z))
        dual = rho * float(np.linalg.norm(G.T @ (z - z_old)))
        estimate = z[:split] if use_identity else x
        trace.append(evaluate(estimate))

        eps_primal = cfg.tol_primal * max(
            float(np.linalg.norm(gx)), float(np.linalg.norm(z)), floor_primal
        )
        eps_dual = cfg.tol_dual * max(rho * float(np.linalg.norm(G.T @ u)), floor_dual)
        if primal <= eps_primal and dual <= eps_dual:
            converged = True
            break

        if polish and iteration % POLISH_EVERY == 0:
            polished = _polish_support(
                gram, rhs, estimate, thresholds, cfg.nonneg, kkt_slack, max_support
            )
            if polished is not None:
                converged = True
                break

        if cfg.adaptive_rho and iteration % RHO_UPDATE_EVERY == 0 and iteration <= RHO_ADAPT_UNTIL:
            if primal > RESIDUAL_RATIO * dual and rho * 2 <= rho_max:
                rho, u = rho * 2, u / 2
                factor = _factorize(gram, gtg, rho)
            elif dual > RESIDUAL_RATIO * primal and rho / 2 >= rho_min:
                rho, u = rho / 2, u * 2
                factor = _factorize(gram, gtg, rho)

    estimate = (z[:split] if use_identity else x).copy()
    if polish and polished is None:
        polished = _polish_support(
            gram, rhs, estimate, thresholds, cfg.nonneg, kkt_slack, max_support
        )
        converged = converged or polished is not None
    if polished is not None:
        estimate = polished
        trace[-1] = evaluate(estimate)

    if converged:
        logger.debug("%s converged in %s iterations", program.value, iteration)
    else:
        logger.warning(
            "%s did not converge in %s iterations (primal %.3g, dual %.3g)",
            program.value,
            cfg.max_iter,
            primal,
            dual,
        )
    return ReconstructionResult(
        spectrum_estimate=estimate,
        objective_trace=trace,
        converged=converged,
        iterations=iteration,
        lambda_used=lambda_used,
        program=program.value,
        primal_residual=primal,
        dual_residual=dual,
    )


def _polish_support(
    gram: np.ndarray,
    rhs: np.ndarray,
    candidate: np.ndarray,
    thresholds: np.ndarray,
    nonneg: bool,
    slack: float,
    max_support: int,
) -> np.ndarray | None:
    """Exact L1 minimiser grown from the support of ``candidate``, or None.

    Each step solves the stationarity equations on the current support, drops
    entries whose sign flips and otherwise adds the worst violator of the
    optimality conditions.
    """
    n_points = candidate.shape[0]
    support = np.flatnonzero(candidate)
    signs = np.sign(candidate[support])
    for _ in range(POLISH_STEPS):
        if support.size > max_support:
            return None
        estimate = np.zeros(n_points)
        if support.size:
            sub = gram[np.ix_(support, support)]
            try:
                values = cho_solve(cho_factor(sub), rhs[support] - thresholds[support] * signs)
            except LinAlgError:
                return None
            keep = values > 0 if nonneg else np.sign(values) == signs
            if not keep.all():
                support, signs = support[keep], signs[keep]
                continue
            estimate[support] = values

        grad = gram @ estimate - rhs
        violations = _kkt_violations(grad, estimate, thresholds, nonneg)
        if not violations.size or violations.max() <= slack:
            return estimate
        worst = int(np.argmax(violations))
        if estimate[worst] != 0:
            return None
        support = np.append(support, worst)
        signs = np.append(signs, 1.0 if nonneg else -np.sign(grad[worst]))
    return None


def _kkt_violations(
    grad: np.ndarray, estimate: np.ndarray, threshold: float | np.ndarray, nonneg: bool
) -> np.ndarray:
    active = estimate != 0
    return np.where(
        active,
        np.abs(grad + threshold * np.sign(estimate)),
        np.maximum(0.0, -(grad + threshold))
        if nonneg
        else np.maximum(0.0, np.abs(grad) - threshold),
    )


def _factorize(gram: np.ndarray, gtg: np.ndarray, rho: float):
    system = gram + rho * gtg
    try:
        return cho_factor(system)
    except LinAlgError:
        # D²-only splitting leaves affine functions to the data term
        ridge = 1e-12 * float(np.trace(system)) / system.shape[0]
        logger.warning("x-update system is singular; adding ridge %.3g", ridge)
        return cho_factor(system + ridge * np.eye(system.shape[0]))


def _soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def _prox_identity(values: np.ndarray, threshold: float, nonneg: bool) -> np.ndarray:
    if nonneg:
        return np.maximum(values - threshold, 0.0)
    return _soft_threshold(values, threshold)


def _solve(
    program: SolverProgram, design: np.ndarray, chi: np.ndarray, cfg: SolverConfig
) -> ReconstructionResult:
    if program == SolverProgram.L1:
        return solve_l1(design, chi, cfg)
    if program == SolverProgram.TGV:
        return solve_tgv(design, chi, cfg)
    if program == SolverProgram.L1_TGV:
        return solve_l1_tgv(design, chi, cfg)
    raise ValueError(f"cross-validation does not support the {program.value} program")


def _with_candidate(cfg: SolverConfig, program: SolverProgram, candidate) -> SolverConfig:
    if program == SolverProgram.L1_TGV:
        lam1, lam2 = candidate
        return cfg.with_(lam1=float(lam1), lam2=float(lam2))
    return cfg.with_(lam=float(candidate))


def _strength(candidate) -> float:
    if isinstance(candidate, (tuple, list)):
        return float(sum(candidate))
    return float(candidate)


def _design(F: MeasurementMatrix | np.ndarray) -> np.ndarray:
    if isinstance(F, MeasurementMatrix):
        return F.design
    design = np.asarray(F, dtype=float)
    if design.ndim != 2:
        raise ValueError("F must be a K x N matrix")
    return design
