"""Quench protocols: temperature trajectories and sudden parameter jumps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bath import thermal_occupation
from .chain import ChainParams, ModeSpectrum

SUDDEN = "sudden"
LINEAR = "linear"
RAMP_RELAX = "ramp_relax"
KINDS = (SUDDEN, LINEAR, RAMP_RELAX)


@dataclass(frozen=True)
class QuenchSchedule:
    """Temperature trajectory ``T(t)`` plus an optional jump of (mu, chi) at t = 0.

    ``pre_quench`` holds the quantum parameters of the initial thermal state
    when they differ from the evolution parameters; its ``L`` is ignored.
    """

    kind: str
    T_i: float
    T_f: float
    tau: Optional[float] = None
    relax_duration: float = 0.0
    pre_quench: Optional[ChainParams] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        if not (self.T_i >= 0 and self.T_f >= 0):
            raise ValueError(f"temperatures must stay >= 0, got T_i={self.T_i}, T_f={self.T_f}")
        if self.kind != SUDDEN:
            if self.tau is None or not self.tau > 0:
                raise ValueError(f"ramp schedules need tau > 0, got {self.tau}")
        if self.relax_duration < 0:
            raise ValueError("relax_duration must be >= 0")
        if self.kind == LINEAR and self.relax_duration:
            raise ValueError("relax_duration only applies to ramp_relax schedules")

    @property
    def ramp_end(self) -> float:
        """End of the driving stage; 0 for sudden quenches."""
        if self.kind == SUDDEN:
            return 0.0
        return self.tau * abs(self.T_i - self.T_f)

    @property
    def duration(self) -> float:
        return self.ramp_end + self.relax_duration

    @property
    def is_heating(self) -> bool:
        return self.T_f > self.T_i

    def with_tau(self, tau: float) -> "QuenchSchedule":
        return QuenchSchedule(self.kind, self.T_i, self.T_f, tau, self.relax_duration, self.pre_quench)


@dataclass(frozen=True)
class SweepSpec:
    base: QuenchSchedule
    taus: Sequence[float] = field(default_factory=tuple)
    times: Sequence[float] = field(default_factory=tuple)
    mus: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        taus = tuple(float(x) for x in self.taus)
        if any(t <= 0 for t in taus):
            raise ValueError("sweep taus must be positive")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("sweep taus must be strictly increasing")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "times", tuple(float(x) for x in self.times))
        object.__setattr__(self, "mus", tuple(float(x) for x in self.mus))


def temperature_at(schedule: QuenchSchedule, t):
    """``T(t)`` for scalar or array ``t >= 0``; constant ``T_f`` after the ramp."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    if schedule.kind == SUDDEN:
        out = np.full_like(t, schedule.T_f)
        return out[()]
    sign = 1.0 if schedule.T_f >= schedule.T_i else -1.0
    T = schedule.T_i + sign * np.minimum(t, schedule.ramp_end) / schedule.tau
    # clamp roundoff at the ramp end so T never dips below 0
    lo, hi = sorted((schedule.T_i, schedule.T_f))
    return np.clip(T, lo, hi)[()]


def initial_occupation(
    schedule: QuenchSchedule,
    chain_pre: ChainParams,
    chain_post: ChainParams,
    spectrum_pre: ModeSpectrum,
    spectrum_post: ModeSpectrum,
) -> np.ndarray:
    """Per-mode quasiparticle occupation just after t = 0.

    The pre-quench state is thermal at ``T_i`` for ``chain_pre``. A jump of
    the quantum parameters rotates it toward 1/2 by the change in Bogoliubov
    angle: ``P(0+) = cos(2b_i - 2b_f) (P(0-) - 1/2) + 1/2``.
    """
    P_minus = thermal_occupation(spectrum_pre.eps, schedule.T_i)
    if (chain_pre.mu, chain_pre.chi) == (chain_post.mu, chain_post.chi):
        return np.array(P_minus, dtype=float)
    c = spectrum_pre.cos2b * spectrum_post.cos2b + spectrum_pre.sin2b * spectrum_post.sin2b
    return c * (P_minus - 0.5) + 0.5
