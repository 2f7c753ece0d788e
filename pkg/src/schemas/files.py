from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.data_types.spectroscopy import GridMode


class GridPayload(BaseModel):
    n: int = Field(..., ge=1)
    tau: float = Field(..., gt=0)
    omega_c: Optional[float] = None
    m_segments: Optional[int] = None
    mode: GridMode = GridMode.BAND


class SpectrumFile(BaseModel):
    grid: GridPayload
    values: List[float]
    family: Optional[str] = None
    config_hash: Optional[str] = None


class SequenceFile(BaseModel):
    method: str
    seed: int
    grid: GridPayload
    sequences: List[dict]
    config_hash: Optional[str] = None


class MeasurementBundleFile(BaseModel):
    """Filter rows and decay exponents, enough to rerun a reconstruction."""

    model_config = ConfigDict(extra="forbid")

    grid: GridPayload
    delta_omega: float = Field(..., gt=0)
    row_meta: List[dict]
    F: List[List[float]]
    chi: List[float]
    chi_noiseless: List[float]
    chi_sigma: List[float]
    clipped: List[bool]
    shots: Optional[int] = None
    seeds: List[int]
    truth: Optional[List[float]] = None
    amplitude: float = 1.0
    method: Optional[str] = None
    config_hash: Optional[str] = None


class ReconstructionFile(BaseModel):
    program: str
    method: Optional[str] = None
    spectrum_estimate: List[float]
    curvature_estimate: Optional[List[float]] = None
    objective_trace: List[float]
    converged: bool
    iterations: int
    lambda_used: dict
    primal_residual: float
    dual_residual: float
    error: Optional[float] = None
    omega: List[float]
    config_hash: Optional[str] = None
    bundle_hash: Optional[str] = None
