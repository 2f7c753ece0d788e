from __future__ import annotations

import itertools
import logging

from src.data_types.spectroscopy import FourierMode, MethodName, SolverProgram
from src.spectroscopy.services.control import (
    FourierBasis,
    FourierEnsemble,
    PulseSequence,
    sample_fourier_indices,
    sample_rademacher,
)
from src.spectroscopy.services.forward import MeasurementMatrix, MeasurementRecord
from src.spectroscopy.services.reconstruction import child_seed, solver_config_from_params
from src.spectroscopy.services.solvers import (
    ReconstructionResult,
    SolverConfig,
    cross_validate,
    lambda_grid,
    lambda_max,
    solve_l1_tgv,
    solve_reweighted_l1,
    solve_tgv,
)
from src.spectroscopy.services.spectra import FrequencyGrid

logger = logging.getLogger("csqns.methods")

DEFAULT_LAMBDA_REL = 1e-3
DEFAULT_REWEIGHT_STEPS = 4
DEFAULT_REWEIGHT_EPSILON = 0.1


# FOURIER + TGV ----------------------------------------------------------------------


class CompressedTgvMethod:
    """Fourier-basis filters reconstructed by the one-step TGV program."""

    name = MethodName.CS_TGV.value

    def build_sequences(
        self,
        grid: FrequencyGrid,
        count: int,
        seed: int,
        params: dict,
    ) -> list[PulseSequence]:
        m_segments = grid.m_segments
        indices = sample_fourier_indices(count, m_segments, seed)
        mode = FourierMode(params.get("fourier_mode", FourierMode.ENSEMBLE))
        if mode == FourierMode.IDEAL:
            return [FourierBasis(j_index=j, m_segments=m_segments) for j in indices]

        n_realizations = int(params.get("n_realizations", 100))
        return [
            FourierEnsemble(
                j_index=j,
                m_segments=m_segments,
                n_realizations=n_realizations,
                seed=child_seed(seed, k),
            )
            for k, j in enumerate(indices)
        ]

    def reconstruct(
        self,
        matrix: MeasurementMatrix,
        record: MeasurementRecord,
        params: dict,
    ) -> ReconstructionResult:
        cfg = solver_config_from_params(params, record)
        lam = _select_weight(matrix, record, params, "lambda_rel", SolverProgram.TGV, cfg)
        return solve_tgv(matrix, record.chi, cfg.with_(lam=lam))


# RADEMACHER --------------------------------------------------------------------------


class CompressedRademacherMethod:
    """Random sign sequences reconstructed by reweighted nonnegative L1.

    ``reweight_steps=0`` gives the plain L1 program.
    """

    name = MethodName.CS_R.value

    def build_sequences(
        self,
        grid: FrequencyGrid,
        count: int,
        seed: int,
        params: dict,
    ) -> list[PulseSequence]:
        p = float(params.get("p", 0.5))
        return [
            sample_rademacher(grid.m_segments, p, child_seed(seed, k)) for k in range(count)
        ]

    def reconstruct(
        self,
        matrix: MeasurementMatrix,
        record: MeasurementRecord,
        params: dict,
    ) -> ReconstructionResult:
        cfg = solver_config_from_params(params, record)
        lam = _select_weight(matrix, record, params, "lambda_rel", SolverProgram.L1, cfg)
        steps = int(params.get("reweight_steps", DEFAULT_REWEIGHT_STEPS))
        logger.debug("CS_R with lambda %.3g and %s reweighting passes", lam, steps)
        return solve_reweighted_l1(
            matrix,
            record.chi,
            cfg.with_(lam=lam),
            steps=steps,
            epsilon_rel=float(params.get("reweight_epsilon", DEFAULT_REWEIGHT_EPSILON)),
        )


class CompressedRademacherTgvMethod(CompressedRademacherMethod):
    """Random sign sequences reconstructed with both L1 and TGV penalties."""

    name = MethodName.CS_R_TGV.value

    def reconstruct(
        self,
        matrix: MeasurementMatrix,
        record: MeasurementRecord,
        params: dict,
    ) -> ReconstructionResult:
        cfg = solver_config_from_params(params, record)
        if matrix.n_rows and params.get("cross_validate", False):
            base = lambda_max(matrix, record.chi)
            scales = [1e-4, 1e-3, 1e-2, 1e-1]
            grid = [(base * a, base * b) for a, b in itertools.product(scales, scales)]
            selection = cross_validate(
                matrix,
                record.chi,
                grid,
                folds=int(params.get("folds", 5)),
                seed=int(params.get("cv_seed", 0)),
                program=SolverProgram.L1_TGV,
                cfg=cfg,
            )
            lam1, lam2 = selection.selected
        else:
            base = lambda_max(matrix, record.chi) if matrix.n_rows else 0.0
            lam1 = base * float(params.get("lambda1_rel", DEFAULT_LAMBDA_REL))
            lam2 = base * float(params.get("lambda2_rel", DEFAULT_LAMBDA_REL))
        return solve_l1_tgv(matrix, record.chi, cfg.with_(lam1=lam1, lam2=lam2))


def _select_weight(
    matrix: MeasurementMatrix,
    record: MeasurementRecord,
    params: dict,
    key: str,
    program: SolverProgram,
    cfg: SolverConfig,
) -> float:
    """lambda_rel * ‖F^T chi‖∞, or the cross-validated choice when requested."""
    if matrix.n_rows == 0:
        return 0.0
    if params.get("cross_validate", False):
        grid = lambda_grid(matrix, record.chi, n=int(params.get("cv_points", 12)))
        selection = cross_validate(
            matrix,
            record.chi,
            grid,
            folds=int(params.get("folds", 5)),
            seed=int(params.get("cv_seed", 0)),
            program=program,
            cfg=cfg,
        )
        return float(selection.selected)
    return lambda_max(matrix, record.chi) * float(params.get(key, DEFAULT_LAMBDA_REL))
