from __future__ import annotations

from typing import Protocol

import numpy as np

from src.data_types.spectroscopy import SolverProgram

from .control import PulseSequence
from .forward import MeasurementMatrix, MeasurementRecord
from .solvers import (
    ReconstructionResult,
    SolverConfig,
    lambda_max,
    solve_curvature_l1,
    solve_l1,
    solve_l1_tgv,
    solve_nnls,
    solve_tgv,
)
from .spectra import FrequencyGrid


class ReconstructionMethod(Protocol):
    """Method contract: which sequences to run and how to invert their data."""
    name: str

    def build_sequences(
        self,
        grid: FrequencyGrid,
        count: int,
        seed: int,
        params: dict,
    ) -> list[PulseSequence]:
        raise NotImplementedError

    def reconstruct(
        self,
        matrix: MeasurementMatrix,
        record: MeasurementRecord,
        params: dict,
    ) -> ReconstructionResult:
        raise NotImplementedError


class MethodRegistry:
    """In-memory registry for reconstruction methods."""
    def __init__(self) -> None:
        self._methods: dict[str, ReconstructionMethod] = {}

    def register(self, method: ReconstructionMethod) -> None:
        self._methods[method.name] = method

    def get(self, name: str) -> ReconstructionMethod:
        try:
            return self._methods[name]
        except KeyError:
            raise ValueError(
                f"Unknown method {name!r}; expected one of {sorted(self._methods)}"
            ) from None

    def names(self) -> list[str]:
        return sorted(self._methods)


class ReconstructionService:
    """Coordinates method lookup, sequence design and reconstruction."""
    def __init__(self, registry: MethodRegistry) -> None:
        self._registry = registry

    def design(
        self,
        method_name: str,
        grid: FrequencyGrid,
        count: int,
        seed: int,
        params: dict,
    ) -> list[PulseSequence]:
        method = self._registry.get(method_name)
        return method.build_sequences(grid, count, seed, params)

    def reconstruct(
        self,
        method_name: str,
        matrix: MeasurementMatrix,
        record: MeasurementRecord,
        params: dict,
    ) -> ReconstructionResult:
        method = self._registry.get(method_name)
        return method.reconstruct(matrix, record, params)


def child_seed(*entropy: int) -> int:
    """Stable 32-bit seed derived from a tuple of integers."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def solver_config_from_params(
    params: dict, record: MeasurementRecord | None = None
) -> SolverConfig:
    weights = None
    if params.get("use_weights", False) and record is not None:
        weights = record.weights
    return SolverConfig(
        rho=float(params.get("rho", 1.0)),
        tol_primal=float(params.get("tol", 1e-8)),
        tol_dual=float(params.get("tol", 1e-8)),
        max_iter=int(params.get("max_iter", 20_000)),
        nonneg=bool(params.get("nonneg", True)),
        weights=weights,
    )


def solve_program(
    program: SolverProgram | str,
    matrix: MeasurementMatrix,
    record: MeasurementRecord,
    params: dict,
) -> ReconstructionResult:
    """Run one solver program directly, bypassing the method's own choice.

    Weights are relative to ‖F^T chi‖∞ as in the registered methods. The
    curvature program reads j from each row's metadata.
    """
    program = SolverProgram(program)
    if program == SolverProgram.NNLS:
        weights = record.weights if params.get("use_weights", False) else None
        return solve_nnls(matrix, record.chi, weights=weights)

    cfg = solver_config_from_params(params, record)
    base = lambda_max(matrix, record.chi) if matrix.n_rows else 0.0
    lam = base * float(params.get("lambda_rel", 1e-3))
    if program == SolverProgram.L1:
        return solve_l1(matrix, record.chi, cfg.with_(lam=lam))
    if program == SolverProgram.TGV:
        return solve_tgv(matrix, record.chi, cfg.with_(lam=lam))
    if program == SolverProgram.L1_TGV:
        return solve_l1_tgv(
            matrix,
            record.chi,
            cfg.with_(
                lam1=base * float(params.get("lambda1_rel", 1e-3)),
                lam2=base * float(params.get("lambda2_rel", 1e-3)),
            ),
        )

    j_indices = [meta.get("j") for meta in matrix.row_meta]
    if any(j is None for j in j_indices):
        raise ValueError("the curvature program needs Fourier rows with a 'j' index")
    lam = base * float(params.get("lambda_rel", 1e-3))
    return solve_curvature_l1(
        matrix, record.chi, [int(j) for j in j_indices], cfg.with_(lam=lam), grid=matrix.grid
    )
