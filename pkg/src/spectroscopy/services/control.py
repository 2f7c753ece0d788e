from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from src.data_types.spectroscopy import SequenceKind

from .spectra import FrequencyGrid

logger = logging.getLogger("csqns.control")


@dataclass(frozen=True, eq=False)
class RademacherSequence:
    """Random ±1 control signs over M segments; a pi pulse sits at every sign change."""

    m_segments: int
    p: float
    seed: int | None
    signs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        signs = np.asarray(self.signs, dtype=np.int8).copy()
        if signs.shape != (self.m_segments,):
            raise ValueError(f"signs must have length {self.m_segments}")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be +1 or -1")
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)

    @property
    def kind(self) -> SequenceKind:
        return SequenceKind.RADEMACHER

    def to_dict(self, include_signs: bool = True) -> dict:
        payload = {
            "type": self.kind.value,
            "M": self.m_segments,
            "p": self.p,
            "seed": self.seed,
        }
        if include_signs:
            payload["signs"] = self.signs.tolist()
        return payload


@dataclass(frozen=True)
class FourierEnsemble:
    """N1 random sign sequences whose averaged filter tracks cos(j*omega*tau)."""

    j_index: int
    m_segments: int
    n_realizations: int
    seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.j_index <= self.m_segments:
            raise ValueError(f"j_index must be in [0, {self.m_segments}], got {self.j_index}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be positive")

    @property
    def kind(self) -> SequenceKind:
        return SequenceKind.FOURIER_ENSEMBLE

    def to_dict(self, include_signs: bool = True) -> dict:
        return {
            "type": self.kind.value,
            "M": self.m_segments,
            "j": self.j_index,
            "n_realizations": self.n_realizations,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FourierBasis:
    """Idealized row cos(j*omega*tau); noiseless studies only."""

    j_index: int
    m_segments: int

    def __post_init__(self) -> None:
        if not 0 <= self.j_index <= self.m_segments:
            raise ValueError(f"j_index must be in [0, {self.m_segments}], got {self.j_index}")

    @property
    def kind(self) -> SequenceKind:
        return SequenceKind.FOURIER_BASIS

    def to_dict(self, include_signs: bool = True) -> dict:
        return {"type": self.kind.value, "M": self.m_segments, "j": self.j_index}


@dataclass(frozen=True)
class CpmgSequence:
    n_pulses: int
    total_time: float

    def __post_init__(self) -> None:
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be at least 1")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")

    @property
    def kind(self) -> SequenceKind:
        return SequenceKind.CPMG

    @property
    def flip_times(self) -> np.ndarray:
        k = np.arange(1, self.n_pulses + 1, dtype=float)
        return (k - 0.5) * self.total_time / self.n_pulses

    def to_dict(self, include_signs: bool = True) -> dict:
        return {"type": self.kind.value, "n_pulses": self.n_pulses, "T": self.total_time}


PulseSequence = Union[RademacherSequence, FourierEnsemble, FourierBasis, CpmgSequence]


@dataclass(frozen=True, eq=False)
class EnsembleRealizations:
    signs: np.ndarray
    rows: np.ndarray
    mean_row: np.ndarray


@dataclass(frozen=True, eq=False)
class SwitchingFunction:
    """Piecewise-constant f(t) in {+1,-1} on [0, T], flipping at ``flip_times``."""

    total_time: float
    flip_times: np.ndarray
    initial_sign: int = 1

    def __post_init__(self) -> None:
        flips = np.asarray(self.flip_times, dtype=float)
        if flips.size and (flips.min() <= 0 or flips.max() >= self.total_time):
            raise ValueError("flip_times must lie strictly inside (0, total_time)")
        if np.any(np.diff(flips) <= 0):
            raise ValueError("flip_times must be strictly increasing")
        object.__setattr__(self, "flip_times", flips)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([0.0], self.flip_times, [self.total_time]))

    @property
    def block_signs(self) -> np.ndarray:
        n_blocks = self.flip_times.size + 1
        return self.initial_sign * (-1.0) ** np.arange(n_blocks)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        flips_before = np.searchsorted(self.flip_times, times, side="right")
        return self.initial_sign * (-1.0) ** flips_before

    def reversed(self) -> SwitchingFunction:
        final_sign = int(self.block_signs[-1])
        return SwitchingFunction(
            self.total_time, (self.total_time - self.flip_times)[::-1], final_sign
        )

    def filter(self, omega: np.ndarray) -> np.ndarray:
        """|integral_0^T f(t) exp(i*omega*t) dt|², closed form per constant block."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        edges, signs = self.edges, self.block_signs
        zero = omega == 0
        safe = np.where(zero, 1.0, omega)

        phases = np.exp(1j * np.outer(safe, edges))
        amplitude = (phases[:, 1:] - phases[:, :-1]) @ signs / (1j * safe)
        amplitude = np.where(zero, np.sum(signs * np.diff(edges)), amplitude)
        return np.abs(amplitude) ** 2


# RADEMACHER ----------------------------------------------------------------------------


def sample_rademacher(m_segments: int, p: float, seed: int) -> RademacherSequence:
    if m_segments < 1:
        raise ValueError("m_segments must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    signs = np.where(rng.random(m_segments) < p, 1, -1)
    return RademacherSequence(m_segments=m_segments, p=p, seed=seed, signs=signs)


def pulse_times(seq: RademacherSequence | np.ndarray) -> list[int]:
    """Segment boundaries m (1-based, between segments m and m+1) carrying a pulse."""
    signs = seq.signs if isinstance(seq, RademacherSequence) else np.asarray(seq)
    return (np.flatnonzero(np.diff(signs) != 0) + 1).tolist()


def count_sign_changes(signs: np.ndarray, cyclic: bool = False) -> np.ndarray:
    """Pulse counts per row of a (..., M) sign array.

    ``cyclic`` also counts the boundary between U_M and U_1 of the next
    repetition, giving pulses per period of a sequence repeated back to back.
    """
    signs = np.asarray(signs)
    if cyclic:
        return np.count_nonzero(signs != np.roll(signs, -1, axis=-1), axis=-1)
    return np.count_nonzero(np.diff(signs, axis=-1) != 0, axis=-1)


def expected_pulse_count(m_segments: int, p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return 2.0 * m_segments * p * (1.0 - p)


def expected_sign_changes(m_segments: int, p: float) -> float:
    """Exact mean of len(pulse_times): only the M-1 interior boundaries can flip."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return 2.0 * max(m_segments - 1, 0) * p * (1.0 - p)


def rademacher_filter(seq: RademacherSequence | np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    signs = seq.signs if isinstance(seq, RademacherSequence) else np.asarray(seq)
    return rademacher_filters(signs[np.newaxis, :], grid)[0]


def rademacher_filters(signs: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """tau² sinc²(omega*tau/2) |sum_m U_m exp(i*omega*m*tau)|² for each row of ``signs``."""
    signs = np.asarray(signs, dtype=float)
    m = np.arange(1, signs.shape[-1] + 1, dtype=float)
    phases = np.exp(1j * np.outer(m * grid.tau, grid.omega))
    amplitude = signs @ phases
    return segment_envelope(grid) * np.abs(amplitude) ** 2


def segment_envelope(grid: FrequencyGrid) -> np.ndarray:
    """tau² sinc²(omega*tau/2), the response of one constant segment."""
    return grid.tau**2 * np.sinc(grid.omega * grid.tau / (2 * math.pi)) ** 2


# FOURIER -------------------------------------------------------------------------------


def fourier_filter_ideal(j_index: int, grid: FrequencyGrid) -> np.ndarray:
    """cos(j*omega*tau) with proportionality constant fixed at 1. May be negative."""
    if not 0 <= j_index <= grid.m_segments:
        raise ValueError(f"j must be in [0, {grid.m_segments}], got {j_index}")
    return np.cos(j_index * grid.omega * grid.tau)


def sample_fourier_indices(count: int, m_segments: int, seed: int) -> list[int]:
    """Draw j in [0, M]; without replacement whenever count <= M + 1.

    Draws are a prefix of one permutation, so a smaller count picks a subset
    of the indices a larger count picks under the same seed.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    if count <= m_segments + 1:
        return [int(j) for j in rng.permutation(m_segments + 1)[:count]]
    logger.warning(
        "Requested %s Fourier indices from %s values; sampling with replacement",
        count,
        m_segments + 1,
    )
    return [int(j) for j in rng.integers(0, m_segments + 1, size=count)]


def fourier_ensemble_signs(ens: FourierEnsemble) -> np.ndarray:
    """(N1, M) sign matrix built from lag-j echo blocks.

    Segments are grouped in blocks of length 2j with a random offset per
    realization. The first half of a block gets fresh signs and the second half
    repeats them, so E[U_m U_m'] is nonzero only for |m - m'| in {0, j}.
    """
    rng = np.random.default_rng(ens.seed)
    n1, m_segments, j = ens.n_realizations, ens.m_segments, ens.j_index
    fresh = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n1, m_segments))
    if j == 0:
        return fresh

    block = 2 * j
    offsets = rng.integers(0, block, size=n1)
    m = np.arange(m_segments)
    position = (m[np.newaxis, :] + offsets[:, np.newaxis]) % block
    echo = (position >= j) & (m[np.newaxis, :] >= j)

    signs = fresh.copy()
    rows, cols = np.nonzero(echo)
    signs[rows, cols] = fresh[rows, cols - j]
    return signs


def fourier_ensemble_realizations(
    ens: FourierEnsemble, grid: FrequencyGrid
) -> EnsembleRealizations:
    signs = fourier_ensemble_signs(ens)
    rows = rademacher_filters(signs, grid)
    return EnsembleRealizations(signs=signs, rows=rows, mean_row=rows.mean(axis=0))


# CPMG ----------------------------------------------------------------------------------


def cpmg_filter(seq: CpmgSequence, grid: FrequencyGrid, ideal: bool = False) -> np.ndarray:
    """Exact CPMG filter; ``ideal`` collapses it onto the grid point nearest pi*n/T."""
    row = switching_function(seq).filter(grid.omega)
    if not ideal:
        return row

    peak = int(np.argmin(np.abs(grid.omega - math.pi * seq.n_pulses / seq.total_time)))
    collapsed = np.zeros_like(row)
    collapsed[peak] = row.sum()
    return collapsed


def cpmg_sequences_for_band(n_set: int, omega_c: float) -> list[CpmgSequence]:
    """n = 1..N_set pulses over T = pi*N_set/omega_c; peaks pi*n/T tile (0, omega_c]."""
    if n_set < 1:
        raise ValueError("n_set must be positive")
    total_time = math.pi * n_set / omega_c
    return [CpmgSequence(n_pulses=n, total_time=total_time) for n in range(1, n_set + 1)]


# SHARED --------------------------------------------------------------------------------


def switching_function(seq: PulseSequence, tau: float | None = None) -> SwitchingFunction:
    if isinstance(seq, CpmgSequence):
        return SwitchingFunction(seq.total_time, seq.flip_times, 1)
    if isinstance(seq, RademacherSequence):
        if tau is None:
            raise ValueError("tau is required for segment-based sequences")
        boundaries = np.asarray(pulse_times(seq), dtype=float)
        return SwitchingFunction(seq.m_segments * tau, boundaries * tau, int(seq.signs[0]))
    raise ValueError(f"{seq.kind.value} sequences have no single switching function")


def sequence_from_dict(payload: dict) -> PulseSequence:
    kind = SequenceKind(payload["type"])
    if kind == SequenceKind.RADEMACHER:
        if payload.get("signs") is not None:
            return RademacherSequence(
                m_segments=int(payload["M"]),
                p=float(payload["p"]),
                seed=payload.get("seed"),
                signs=np.asarray(payload["signs"]),
            )
        return sample_rademacher(int(payload["M"]), float(payload["p"]), int(payload["seed"]))
    if kind == SequenceKind.FOURIER_ENSEMBLE:
        return FourierEnsemble(
            j_index=int(payload["j"]),
            m_segments=int(payload["M"]),
            n_realizations=int(payload["n_realizations"]),
            seed=int(payload["seed"]),
        )
    if kind == SequenceKind.FOURIER_BASIS:
        return FourierBasis(j_index=int(payload["j"]), m_segments=int(payload["M"]))
    return CpmgSequence(n_pulses=int(payload["n_pulses"]), total_time=float(payload["T"]))
