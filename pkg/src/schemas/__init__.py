from .config import ExperimentConfig
from .files import (
    GridPayload,
    MeasurementBundleFile,
    ReconstructionFile,
    SequenceFile,
    SpectrumFile,
)

__all__ = [
    "ExperimentConfig",
    "GridPayload",
    "MeasurementBundleFile",
    "ReconstructionFile",
    "SequenceFile",
    "SpectrumFile",
]
