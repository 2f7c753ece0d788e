from __future__ import annotations

import numpy as np

from src.data_types.spectroscopy import MethodName
from src.spectroscopy.services.control import (
    PulseSequence,
    cpmg_filter,
    cpmg_sequences_for_band,
    sequence_from_dict,
)
from src.spectroscopy.services.forward import MeasurementMatrix, MeasurementRecord
from src.spectroscopy.services.solvers import ReconstructionResult, solve_nnls
from src.spectroscopy.services.spectra import FrequencyGrid


class CpmgNnlsMethod:
    """CPMG band scan deconvolved with nonnegative least squares.

    N_set sequences with n = 1..N_set pulses over a common T tile (0, omega_c].
    The seed is unused; the scan is deterministic.
    """

    name = MethodName.CPMG.value

    def build_sequences(
        self,
        grid: FrequencyGrid,
        count: int,
        seed: int,
        params: dict,
    ) -> list[PulseSequence]:
        if count == 0:
            return []
        return list(cpmg_sequences_for_band(count, grid.omega_c))

    def reconstruct(
        self,
        matrix: MeasurementMatrix,
        record: MeasurementRecord,
        params: dict,
    ) -> ReconstructionResult:
        design: MeasurementMatrix | np.ndarray = matrix
        if params.get("ideal_design", False) and matrix.grid is not None:
            # the delta-function picture of each CPMG filter
            rows = [
                cpmg_filter(sequence_from_dict(meta), matrix.grid, ideal=True)
                for meta in matrix.row_meta
            ]
            design = np.vstack(rows) * matrix.delta_omega
        weights = record.weights if params.get("use_weights", False) else None
        return solve_nnls(design, record.chi, weights=weights)
