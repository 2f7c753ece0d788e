from .control import (
    CpmgSequence,
    FourierBasis,
    FourierEnsemble,
    PulseSequence,
    RademacherSequence,
    SwitchingFunction,
    sample_rademacher,
    sequence_from_dict,
)
from .experiments import SweepResult, accuracy_vs_k, critical_k
from .forward import (
    MeasurementBundle,
    MeasurementMatrix,
    MeasurementRecord,
    ToeplitzOperator,
    assemble_measurements,
    build_measurement_matrix,
    simulate_record,
)
from .reconstruction import (
    MethodRegistry,
    ReconstructionMethod,
    ReconstructionService,
    solve_program,
)
from .solvers import CrossValidationResult, ReconstructionResult, SolverConfig
from .spectra import CurvatureVector, FrequencyGrid, QdSurrogateParams, Spectrum
from .trials import SweepSpec, TrialSeeds, build_spectrum, run_scenario

__all__ = [
    "CpmgSequence",
    "FourierBasis",
    "FourierEnsemble",
    "PulseSequence",
    "RademacherSequence",
    "SwitchingFunction",
    "sample_rademacher",
    "sequence_from_dict",
    "SweepResult",
    "accuracy_vs_k",
    "critical_k",
    "MeasurementBundle",
    "MeasurementMatrix",
    "MeasurementRecord",
    "ToeplitzOperator",
    "assemble_measurements",
    "build_measurement_matrix",
    "simulate_record",
    "MethodRegistry",
    "ReconstructionMethod",
    "ReconstructionService",
    "solve_program",
    "CrossValidationResult",
    "ReconstructionResult",
    "SolverConfig",
    "CurvatureVector",
    "FrequencyGrid",
    "QdSurrogateParams",
    "Spectrum",
    "SweepSpec",
    "TrialSeeds",
    "build_spectrum",
    "run_scenario",
]
