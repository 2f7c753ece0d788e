import hashlib
import json
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.data_types.spectroscopy import (
    FourierMode,
    GridMode,
    MethodName,
    SpectrumFamily,
    SweepKind,
)


class GridSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_points: int = Field(100, ge=3)
    tau: float = Field(1.0, gt=0)
    mode: GridMode = GridMode.BAND
    omega_c: Optional[float] = Field(None, gt=0)


class SpectrumSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: SpectrumFamily = SpectrumFamily.SPARSE
    sparsity: int = Field(4, ge=1)
    kinks: int = Field(4, ge=1)
    norm: float = Field(1.0, gt=0)
    peak_centers: Optional[List[float]] = None
    peak_widths: Optional[List[float]] = None
    peak_heights: Optional[List[float]] = None
    background_amplitude: Optional[float] = Field(None, ge=0)
    background_decay: Optional[float] = Field(None, gt=0)

    def params(self) -> dict:
        if self.family == SpectrumFamily.SPARSE:
            return {"sparsity": self.sparsity, "norm": self.norm}
        if self.family == SpectrumFamily.PIECEWISE_LINEAR:
            return {"kinks": self.kinks}
        surrogate = {
            "peak_centers": self.peak_centers,
            "peak_widths": self.peak_widths,
            "peak_heights": self.peak_heights,
            "background_amplitude": self.background_amplitude,
            "background_decay": self.background_decay,
        }
        return {key: value for key, value in surrogate.items() if value is not None}


class SequenceSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = Field(20, ge=0)
    p: float = Field(0.5, ge=0, le=1)
    fourier_mode: FourierMode = FourierMode.ENSEMBLE
    n_realizations: int = Field(100, ge=1)
    cpmg_ideal_design: bool = False


class ShotSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    n_shots: int = Field(5000, ge=1)
    chi_target: float = Field(0.5, gt=0)


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lambda_rel: float = Field(1e-3, ge=0)
    lambda1_rel: float = Field(1e-3, ge=0)
    lambda2_rel: float = Field(1e-3, ge=0)
    rho: float = Field(1.0, gt=0)
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(20_000, ge=1)
    nonneg: bool = True
    use_weights: bool = False
    cross_validate: bool = False
    folds: int = Field(5, ge=2)
    cv_points: int = Field(12, ge=1)
    reweight_steps: int = Field(4, ge=0)
    reweight_epsilon: float = Field(0.1, gt=0)


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: SweepKind = SweepKind.ACCURACY
    k_values: List[int] = Field(default_factory=list)
    n_trials: int = Field(40, ge=1)
    threshold: float = Field(0.5, gt=0)
    series: List[int] = Field(default_factory=list)
    sparsities: List[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6])
    sizes: List[int] = Field(default_factory=lambda: [50, 100, 200, 400])
    fixed_sparsity: int = Field(2, ge=1)
    methods: List[MethodName] = Field(
        default_factory=lambda: [MethodName.CS_TGV, MethodName.CS_R_TGV, MethodName.CPMG]
    )
    p_values: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.05])
    n_instances: int = Field(50, ge=1)
    noise_level: float = Field(0.02, ge=0)

    @model_validator(mode="after")
    def _check_values(self) -> "SweepSection":
        if self.kind != SweepKind.CURVATURE_VS_TGV and not self.k_values:
            raise ValueError("sweep.k_values must not be empty")
        if any(k < 0 for k in self.k_values):
            raise ValueError("sweep.k_values must be nonnegative")
        if any(not 0 < p < 1 for p in self.p_values):
            raise ValueError("sweep.p_values must lie in (0, 1)")
        return self


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = None
    plot: bool = False


class ExperimentConfig(BaseModel):
    """One experiment, as written in a TOML config or preset."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, le=2**64 - 1)
    method: MethodName = MethodName.CS_R
    grid: GridSection = Field(default_factory=GridSection)
    spectrum: SpectrumSection = Field(default_factory=SpectrumSection)
    sequences: SequenceSection = Field(default_factory=SequenceSection)
    shots: ShotSection = Field(default_factory=ShotSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    sweep: Optional[SweepSection] = None
    output: OutputSection = Field(default_factory=OutputSection)

    @property
    def n_shots(self) -> Optional[int]:
        return self.shots.n_shots if self.shots.enabled else None

    def method_params(self) -> dict:
        params = self.solver.model_dump()
        params.update(
            p=self.sequences.p,
            fourier_mode=self.sequences.fourier_mode.value,
            n_realizations=self.sequences.n_realizations,
            ideal_design=self.sequences.cpmg_ideal_design,
        )
        return params

    def fingerprint(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]
