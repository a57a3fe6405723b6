"""Markovian thermal bath: statistics, spectral density and jump rates.

Temperatures are plain non-negative floats. ``T == 0`` is always handled by
its explicit limit, never by dividing by ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

FERMIONIC = 1
BOSONIC = -1

#: Temperature used to stand in for an infinite-temperature initial state.
T_CAP = 1e9


@dataclass(frozen=True)
class BathSpec:
    zeta: int
    s: float
    gamma0: float

    def __post_init__(self):
        if self.zeta not in (FERMIONIC, BOSONIC):
            raise ValueError(f"zeta must be +1 (fermionic) or -1 (bosonic), got {self.zeta}")
        if not self.s >= 0:
            raise ValueError(f"spectral exponent s must be >= 0, got {self.s}")
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")

    @property
    def fermionic(self) -> bool:
        return self.zeta == FERMIONIC


@dataclass(frozen=True)
class ModeRates:
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray

    @property
    def gamma_total(self) -> np.ndarray:
        return self.gamma_plus + self.gamma_minus


def _check_T(T: float) -> None:
    if not T >= 0:
        raise ValueError(f"temperature must be >= 0, got {T}")


def occupation(eps, T: float, zeta: int):
    """Bath occupation ``1/(exp(eps/T) + zeta)``; zero at ``T = 0``."""
    _check_T(T)
    eps = np.asarray(eps, dtype=float)
    if T == 0:
        return np.zeros_like(eps)[()]
    with np.errstate(over="ignore"):
        x = eps / T
    if zeta == FERMIONIC:
        return expit(-x)[()]
    if np.any(eps <= 0):
        raise ValueError("Bose-Einstein occupation diverges at eps = 0 for T > 0")
    # e^{-x}/(1 - e^{-x}) avoids overflow for x >> 1
    return (np.exp(-x) / -np.expm1(-x))[()]


def thermal_occupation(eps, T: float):
    """Fermi-Dirac occupation of the chain's quasiparticles at temperature ``T``."""
    return occupation(eps, T, FERMIONIC)


def spectral_density(spec: BathSpec, eps):
    return spec.gamma0 * np.power(np.asarray(eps, dtype=float), spec.s)


def rates(spec: BathSpec, eps, T: float) -> ModeRates:
    S = spectral_density(spec, eps)
    f = occupation(eps, T, spec.zeta)
    return ModeRates(gamma_plus=S * f, gamma_minus=S * (1.0 - spec.zeta * f))


def total_rate(spec: BathSpec, eps, T: float):
    """``gamma_+ + gamma_-`` without forming the two halves.

    Fermionic: ``gamma0 eps**s`` for every T. Bosonic: ``gamma0 eps**s coth(eps/2T)``.
    """
    _check_T(T)
    S = spectral_density(spec, eps)
    if spec.fermionic or T == 0:
        return S
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("bosonic rate diverges at eps = 0 for T > 0")
    return S / np.tanh(eps / (2.0 * T))


def rate_difference(spec: BathSpec, eps, T: float):
    """``gamma_+ - gamma_-``: ``S (2f - 1)`` for fermions, ``-S`` for bosons."""
    S = spectral_density(spec, eps)
    if spec.fermionic:
        return S * (2.0 * occupation(eps, T, FERMIONIC) - 1.0)
    return -S
