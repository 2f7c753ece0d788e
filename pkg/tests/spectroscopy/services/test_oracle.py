from __future__ import annotations

import numpy as np
import pytest

from src.spectroscopy.services.control import CpmgSequence, RademacherSequence
from src.spectroscopy.services.oracle import (
    NoiseTraceConfig,
    exact_free_evolution_chi,
    monte_carlo_dephasing_oracle,
)
from src.spectroscopy.services.spectra import FrequencyGrid, Spectrum, ou_spectrum

VARIANCE = 0.1
CORRELATION_TIME = 1.0


@pytest.fixture(scope="module")
def ou_truth() -> Spectrum:
    # 200 segments of 0.01 cover T = 2; the dense grid keeps quadrature error well under 1%
    grid = FrequencyGrid.band(40_000, tau=0.01, m_segments=200)
    return Spectrum(grid, ou_spectrum(grid.omega, VARIANCE, CORRELATION_TIME))


def test_free_evolution_matches_trace_average(ou_truth: Spectrum) -> None:
    seq = RademacherSequence(m_segments=200, p=1.0, seed=None, signs=np.ones(200))
    config = NoiseTraceConfig(
        correlation_time=CORRELATION_TIME, variance=VARIANCE, dt=0.01, n_traces=10_000, seed=1
    )

    result = monte_carlo_dephasing_oracle(config, seq, ou_truth)

    exact = exact_free_evolution_chi(2.0, VARIANCE, CORRELATION_TIME)
    assert result.n_steps == 200
    assert result.predicted_chi == pytest.approx(exact, rel=0.02)
    assert abs(result.z_score) <= 4


def test_cpmg_echo_matches_trace_average(ou_truth: Spectrum) -> None:
    config = NoiseTraceConfig(
        correlation_time=CORRELATION_TIME, variance=VARIANCE, dt=0.01, n_traces=10_000, seed=2
    )
    echo = CpmgSequence(n_pulses=2, total_time=2.0)

    result = monte_carlo_dephasing_oracle(config, echo, ou_truth)

    assert result.predicted_probability > 0.5
    assert abs(result.z_score) <= 4


def test_coarse_time_step_is_rejected() -> None:
    with pytest.raises(ValueError, match="too coarse"):
        NoiseTraceConfig(correlation_time=1.0, variance=0.1, dt=0.2)
