"""Covariance (third-quantization) evolution of the open chain.

For each momentum pair the quadratic observables ``n = <a_k^+ a_k>`` and
``m = <a_k^+ a_-k^+>`` obey closed linear ODEs

    dn/dt = g1 + g2 c - 2 g1 n - 2 eps s Re(m)
    dm/dt = i g2 s - 2 g1 m + eps [s (2n - 1) + 2i c m]

with ``g1 = gamma_+ + gamma_-``, ``g2 = gamma_+ - gamma_-``, ``c = cos 2beta``
and ``s = sin 2beta`` of the evolution Hamiltonian. Quasiparticle
occupations are read out as ``P = c (n - 1/2) + s Im(m) + 1/2``.

This path never uses the rate equation, so it serves as an independent
check of the other solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bath import BathSpec, rates, thermal_occupation
from .chain import ChainParams, build_grid, spectrum
from .dynamics import IntegrationError, TimeSeries, _assemble
from .numerics import mode_mean
from .schedules import QuenchSchedule, temperature_at


@dataclass
class CovarianceEnsemble:
    n: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=float)
        self.m = np.asarray(self.m, dtype=complex)
        if self.n.shape != self.m.shape:
            raise ValueError("n and m must have the same shape")

    def physicality_violation(self) -> float:
        """Largest ``|m|^2 - n(1-n)``; positive values are unphysical."""
        return float(np.max(np.abs(self.m) ** 2 - self.n * (1.0 - self.n)))


def thermal_covariance(chain: ChainParams, T: float, t: float = 0.0) -> CovarianceEnsemble:
    """Covariances of the thermal state of ``chain`` at temperature ``T``."""
    sp = spectrum(chain, build_grid(chain))
    x = thermal_occupation(sp.eps, T) - 0.5
    return CovarianceEnsemble(n=0.5 + sp.cos2b * x, m=1j * sp.sin2b * x, t=t)


def quasiparticle_occupation(ens: CovarianceEnsemble, chain: ChainParams) -> np.ndarray:
    sp = spectrum(chain, build_grid(chain))
    return sp.cos2b * (ens.n - 0.5) + sp.sin2b * ens.m.imag + 0.5


class _PairSystem:
    def __init__(self, chain, bath, schedule):
        ks = build_grid(chain)
        half = ks.size // 2
        sp = spectrum(chain, ks[half:])
        self.eps, self.c, self.s = sp.eps, sp.cos2b, sp.sin2b
        self.bath = bath
        self.schedule = schedule
        self._cache = {}

    def coefficients(self, t):
        T = float(temperature_at(self.schedule, t))
        hit = self._cache.get(T)
        if hit is None:
            r = rates(self.bath, self.eps, T)
            hit = (r.gamma_plus + r.gamma_minus, r.gamma_plus - r.gamma_minus)
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[T] = hit
        return hit

    def rhs(self, t, n, m):
        g1, g2 = self.coefficients(t)
        eps, c, s = self.eps, self.c, self.s
        dn = g1 + g2 * c - 2.0 * g1 * n - 2.0 * eps * s * m.real
        dm = 1j * g2 * s - 2.0 * g1 * m + eps * (s * (2.0 * n - 1.0) + 2j * c * m)
        return dn, dm

    def advance(self, n, m, t0, t1, n_steps):
        h = (t1 - t0) / n_steps
        for i in range(n_steps):
            t = t0 + i * h
            k1n, k1m = self.rhs(t, n, m)
            k2n, k2m = self.rhs(t + h / 2, n + h / 2 * k1n, m + h / 2 * k1m)
            k3n, k3m = self.rhs(t + h / 2, n + h / 2 * k2n, m + h / 2 * k2m)
            k4n, k4m = self.rhs(t + h, n + h * k3n, m + h * k3m)
            n = n + h / 6 * (k1n + 2 * k2n + 2 * k3n + k4n)
            m = m + h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
        return n, m

    def occupation(self, n, m):
        return self.c * (n - 0.5) + self.s * m.imag + 0.5


def _max_rate(system: _PairSystem, schedule: QuenchSchedule) -> float:
    # the total rate grows with T, so the hotter endpoint bounds it
    r = rates(system.bath, system.eps, max(schedule.T_i, schedule.T_f))
    return float(max(np.max(system.eps), np.max(r.gamma_total)))


def third_quantization_evolve(
    init: CovarianceEnsemble,
    schedule: QuenchSchedule,
    chain: ChainParams,
    bath: BathSpec,
    sample_times,
    tol: float = 1e-8,
    h_max: Optional[float] = None,
    max_refinements: int = 4,
) -> TimeSeries:
    """Sample ``D(t)`` by classical RK4 on the covariance ODEs.

    The step obeys ``h * max(eps, g1) <= 0.1``; every run is repeated at
    ``h/2`` and the step is halved until both agree on ``D`` within ``tol``.
    """
    sample_times = np.asarray(sample_times, dtype=float)
    if sample_times.size and sample_times[0] < init.t:
        raise ValueError("sample times must not precede the initial state")
    L = chain.L
    if init.n.size != L:
        raise ValueError(f"initial state has {init.n.size} modes, chain has {L}")
    system = _PairSystem(chain, bath, schedule)
    half = L // 2
    n0, m0 = init.n[half:].copy(), init.m[half:].copy()
    t_end = float(sample_times[-1]) if sample_times.size else init.t
    h = 0.1 / _max_rate(system, schedule)
    if h_max is not None:
        h = min(h, h_max)
    # ramp corners must fall on step boundaries
    breaks = [b for b in (schedule.ramp_end,) if init.t < b < t_end]
    for _ in range(max_refinements + 1):
        coarse = _run(system, n0, m0, init.t, sample_times, breaks, h)
        fine = _run(system, n0, m0, init.t, sample_times, breaks, h / 2)
        dev = max((abs(a - b) for a, b in zip(coarse[0], fine[0])), default=0.0)
        if dev <= tol:
            break
        h /= 2
    else:
        raise IntegrationError(f"RK4 did not reach tol={tol:g} (last deviation {dev:.3g}, h={h:.3g})")
    D, violation, t_bad = fine
    if violation > 10 * tol:
        raise IntegrationError(f"covariance lost physicality by {violation:.3g} at t={t_bad:.6g}")
    eps_full = spectrum(chain, build_grid(chain)).eps
    return _assemble(sample_times, np.array(D), schedule, eps_full, schedule.ramp_end)


def _run(system, n, m, t0, sample_times, breaks, h):
    nodes = sorted(set([float(x) for x in sample_times] + list(breaks)))
    wanted = set(float(x) for x in sample_times)
    D, worst, t_worst = [], -math.inf, t0
    t = t0
    for target in nodes:
        if target > t:
            steps = max(1, math.ceil((target - t) / h - 1e-9))
            n, m = system.advance(n, m, t, target, steps)
            t = target
        if target in wanted:
            P = system.occupation(n, m)
            # the -k partner carries the same occupation
            D.append(mode_mean(P))
            bad = float(np.max(np.abs(m) ** 2 - n * (1.0 - n)))
            if bad > worst:
                worst, t_worst = bad, target
    return D, worst, t_worst
