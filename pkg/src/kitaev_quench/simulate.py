"""Run helpers: pick the right solver for a schedule and sample it."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bath import BathSpec, total_rate, thermal_occupation
from .chain import ChainParams, ModeSpectrum, build_grid, spectrum
from .dynamics import (
    TimeSeries,
    _assemble,
    lindblad_validity_warning,
    ramp_solution_ode,
    ramp_solution_quadrature,
)
from .numerics import mode_mean
from .schedules import SUDDEN, QuenchSchedule, initial_occupation


def log_times(t_min: float, t_max: float, per_decade: int = 60) -> np.ndarray:
    """Logarithmic sample grid including both endpoints."""
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    n = max(2, int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1)
    return np.geomspace(t_min, t_max, n)


@dataclass
class Setup:
    """Spectra and initial occupations shared by every solver."""

    chain: ChainParams
    chain_pre: ChainParams
    post: ModeSpectrum
    pre: ModeSpectrum
    P0: np.ndarray


def prepare(chain: ChainParams, bath: BathSpec, schedule: QuenchSchedule) -> Setup:
    ks = build_grid(chain)
    post = spectrum(chain, ks)
    chain_pre = chain
    pre = post
    if schedule.pre_quench is not None:
        chain_pre = chain.with_quantum(schedule.pre_quench.mu, schedule.pre_quench.chi)
        pre = spectrum(chain_pre, ks)
    lindblad_validity_warning(bath, post.eps)
    P0 = initial_occupation(schedule, chain_pre, chain, pre, post)
    return Setup(chain, chain_pre, post, pre, P0)


def ramp_end_state(setup: Setup, bath: BathSpec, schedule: QuenchSchedule,
                   quad_tol: float = 1e-12, ode_tol: float = 1e-10) -> np.ndarray:
    """Occupations when the drive stops: quadrature for fermionic baths, ODE otherwise."""
    if schedule.kind == SUDDEN:
        return setup.P0.copy()
    if bath.fermionic:
        return ramp_solution_quadrature(setup.P0, schedule, setup.chain, bath,
                                        quad_tol=quad_tol, eps=setup.post.eps).P
    series = ramp_solution_ode(setup.P0, schedule, setup.chain, bath, [schedule.ramp_end],
                               ode_tol=ode_tol, eps=setup.post.eps)
    return series.P_ramp_end


def simulate(chain: ChainParams, bath: BathSpec, schedule: QuenchSchedule, sample_times,
             quad_tol: float = 1e-12, ode_tol: float = 1e-10) -> TimeSeries:
    """Excitation density at absolute times ``sample_times`` (t = 0 is the quench)."""
    setup = prepare(chain, bath, schedule)
    times = np.asarray(sample_times, dtype=float)
    eps = setup.post.eps
    if schedule.kind == SUDDEN:
        D = _relax_density(setup.P0, eps, bath, schedule.T_f, times)
        return _assemble(times, D, schedule, eps, 0.0)
    if schedule.duration and times.size and times[-1] > schedule.duration * (1 + 1e-12):
        raise ValueError("sample times extend past the end of the schedule")
    return ramp_solution_ode(setup.P0, schedule, chain, bath, times, ode_tol=ode_tol, eps=eps)


def relaxation_after_ramp(chain: ChainParams, bath: BathSpec, schedule: QuenchSchedule,
                          relax_times, quad_tol: float = 1e-12, ode_tol: float = 1e-10) -> TimeSeries:
    """Free relaxation at ``T_f`` after the drive; ``relax_times`` count from the ramp end.

    The returned series uses the relaxation clock; add ``t_ramp_end`` for the
    absolute time.
    """
    setup = prepare(chain, bath, schedule)
    P_end = ramp_end_state(setup, bath, schedule, quad_tol, ode_tol)
    times = np.asarray(relax_times, dtype=float)
    D = _relax_density(P_end, setup.post.eps, bath, schedule.T_f, times)
    sudden = QuenchSchedule(SUDDEN, schedule.T_f, schedule.T_f)
    series = _assemble(times, D, sudden, setup.post.eps, 0.0)
    series.t_ramp_end = schedule.ramp_end
    series.P_ramp_end = P_end
    return series


def _relax_density(P0, eps, bath, T_f, times):
    g = total_rate(bath, eps, T_f)
    P_th = thermal_occupation(eps, T_f)
    dP = np.asarray(P0, dtype=float) - P_th
    return np.array([mode_mean(P_th + np.exp(-2.0 * g * t) * dP) for t in times])


@dataclass(frozen=True)
class SweepRow:
    tau: float
    t_f: float
    D_final: float
    D_th_final: float

    @property
    def excess(self) -> float:
        return self.D_final - self.D_th_final


def _sweep_one(args):
    chain, bath, schedule, quad_tol, ode_tol = args
    setup = prepare(chain, bath, schedule)
    P = ramp_end_state(setup, bath, schedule, quad_tol, ode_tol)
    D_th = mode_mean(thermal_occupation(setup.post.eps, schedule.T_f)) if schedule.T_f > 0 else 0.0
    return SweepRow(schedule.tau, schedule.ramp_end, mode_mean(P), D_th)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("KQ_WORKERS")
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"KQ_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def tau_sweep(chain: ChainParams, bath: BathSpec, base: QuenchSchedule, taus: Sequence[float],
              quad_tol: float = 1e-12, ode_tol: float = 1e-10,
              workers: Optional[int] = None) -> list:
    """Final state of a ramp for every ``tau``; rows come back in ``taus`` order."""
    jobs = [(chain, bath, base.with_tau(float(t)), quad_tol, ode_tol) for t in taus]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_one, jobs))
