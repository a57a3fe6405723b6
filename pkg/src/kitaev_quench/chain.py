"""Kitaev chain parameters, momentum grid and quasiparticle spectrum.

The chain is diagonal in Bogoliubov quasiparticles with energies

    eps_k = 2 * sqrt((mu - cos k)**2 + chi**2 * sin(k)**2)

and Bogoliubov angles fixed by ``2 beta_k = atan2(-chi sin k, mu - cos k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ChainParams:
    mu: float
    chi: float
    L: int

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.chi)):
            raise ValueError(f"mu and chi must be finite, got mu={self.mu}, chi={self.chi}")
        if isinstance(self.L, bool) or int(self.L) != self.L:
            raise ValueError(f"L must be an integer, got {self.L!r}")
        if self.L < 2 or self.L % 2:
            raise ValueError(f"L must be a positive even integer >= 2, got {self.L}")
        object.__setattr__(self, "L", int(self.L))

    def with_quantum(self, mu: float, chi: float) -> "ChainParams":
        return ChainParams(mu=mu, chi=chi, L=self.L)


@dataclass(frozen=True)
class ModeSpectrum:
    """Per-mode energies ``eps`` and Bogoliubov angles ``beta`` (radians)."""

    eps: np.ndarray
    beta: np.ndarray

    @property
    def cos2b(self) -> np.ndarray:
        return np.cos(2.0 * self.beta)

    @property
    def sin2b(self) -> np.ndarray:
        return np.sin(2.0 * self.beta)


@dataclass(frozen=True)
class GapReport:
    is_critical: bool
    gap_closing_k: Optional[float]
    z: Optional[int]


def build_grid(params: ChainParams) -> np.ndarray:
    """Antiperiodic momenta ``±pi(2m-1)/L``, m = 1..L/2, in ascending order."""
    L = params.L
    if L < 2 or L % 2:
        raise ValueError(f"L must be a positive even integer, got {L}")
    m = np.arange(1, L // 2 + 1)
    pos = np.pi * (2 * m - 1) / L
    return np.concatenate([-pos[::-1], pos])


def spectrum(params: ChainParams, ks: np.ndarray) -> ModeSpectrum:
    ks = np.asarray(ks, dtype=float)
    a = params.mu - np.cos(ks)
    b = -params.chi * np.sin(ks)
    eps = 2.0 * np.hypot(a, b)
    beta = 0.5 * np.arctan2(b, a)
    return ModeSpectrum(eps=eps, beta=beta)


def gap_info(params: ChainParams) -> GapReport:
    # z=2 only at the chi=0 point of the critical line; see eps_k ~ k**2 there.
    if abs(params.mu) != 1.0:
        return GapReport(is_critical=False, gap_closing_k=None, z=None)
    k_star = 0.0 if params.mu > 0 else math.pi
    z = 2 if params.chi == 0 else 1
    return GapReport(is_critical=True, gap_closing_k=k_star, z=z)
