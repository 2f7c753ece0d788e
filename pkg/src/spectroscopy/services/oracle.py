from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .control import PulseSequence, switching_function
from .forward import decay_exponent, survival_probability
from .spectra import Spectrum

logger = logging.getLogger("csqns.oracle")

TRACE_BATCH = 4096


@dataclass(frozen=True)
class NoiseTraceConfig:
    """Ornstein-Uhlenbeck noise with <V(t)V(t')> = variance * exp(-|t-t'|/correlation_time)."""

    correlation_time: float
    variance: float
    dt: float
    n_traces: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.correlation_time <= 0:
            raise ValueError("correlation_time must be positive")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > self.correlation_time / 10:
            raise ValueError(
                f"dt={self.dt} is too coarse for correlation_time={self.correlation_time}"
                " (need dt <= correlation_time/10)"
            )
        if self.n_traces < 1:
            raise ValueError("n_traces must be at least 1")


@dataclass
class OracleResult:
    probability: float
    probability_sigma: float
    predicted_probability: float
    predicted_chi: float
    n_traces: int
    n_steps: int

    @property
    def z_score(self) -> float:
        if self.probability_sigma == 0:
            return 0.0 if self.probability == self.predicted_probability else math.inf
        return (self.probability - self.predicted_probability) / self.probability_sigma

    def to_dict(self) -> dict:
        return asdict(self)


def monte_carlo_dephasing_oracle(
    config: NoiseTraceConfig,
    seq: PulseSequence,
    expected: Spectrum,
) -> OracleResult:
    """Empirical P = (1 + <cos 2 phi>)/2 with phi = integral of f(t) V(t) dt.

    V is sampled exactly as an AR(1) chain from the stationary OU law and the
    phase integral uses the trapezoid rule per step with f at the step midpoint.
    The prediction integrates the exact switching-function filter against
    ``expected`` on its grid.
    """
    switching = switching_function(seq, tau=expected.grid.tau)
    total_time = switching.total_time
    n_steps = max(1, math.ceil(total_time / config.dt))
    dt = total_time / n_steps
    midpoints = (np.arange(n_steps) + 0.5) * dt
    f_mid = switching.evaluate(midpoints)

    decay = math.exp(-dt / config.correlation_time)
    sigma = math.sqrt(config.variance)
    kick = sigma * math.sqrt(1.0 - decay**2)

    n_batches = math.ceil(config.n_traces / TRACE_BATCH)
    children = np.random.SeedSequence(config.seed).spawn(n_batches)
    cosines = np.empty(config.n_traces)

    for batch, child in enumerate(children):
        rng = np.random.default_rng(child)
        start = batch * TRACE_BATCH
        size = min(TRACE_BATCH, config.n_traces - start)
        v = sigma * rng.standard_normal(size)
        phase = np.zeros(size)
        for step in range(n_steps):
            v_next = decay * v + kick * rng.standard_normal(size)
            phase += f_mid[step] * 0.5 * (v + v_next) * dt
            v = v_next
        cosines[start : start + size] = np.cos(2 * phase)

    probability = 0.5 * (1 + float(cosines.mean()))
    spread = float(cosines.std(ddof=1)) if config.n_traces > 1 else 0.0
    probability_sigma = 0.5 * spread / math.sqrt(config.n_traces)

    predicted_chi = decay_exponent(switching.filter(expected.omega), expected)
    result = OracleResult(
        probability=probability,
        probability_sigma=probability_sigma,
        predicted_probability=float(survival_probability(predicted_chi)),
        predicted_chi=predicted_chi,
        n_traces=config.n_traces,
        n_steps=n_steps,
    )
    logger.info(
        "Oracle P=%.5f +/- %.5f, predicted %.5f (chi=%.4f)",
        result.probability,
        result.probability_sigma,
        result.predicted_probability,
        result.predicted_chi,
    )
    return result


def exact_free_evolution_chi(total_time: float, variance: float, correlation_time: float) -> float:
    """chi = 2<phi²> for free evolution under OU noise, in closed form."""
    ratio = total_time / correlation_time
    return 4 * variance * correlation_time**2 * (ratio - 1 + math.exp(-ratio))
