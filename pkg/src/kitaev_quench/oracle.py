"""Cross-checks between the independent solvers on small chains.

Each case samples ``D(t)`` along a temperature-only schedule with every
applicable route:

* closed form at constant temperature,
* quadrature of the integral solution (ramp stage only),
* the exponential integrator,
* third-quantization RK4 on the covariance ODEs.

``max_deviation`` is the largest pairwise difference over all samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BOSONIC, FERMIONIC, BathSpec, rates, thermal_occupation
from .chain import ChainParams, build_grid, spectrum
from .dynamics import RateIntegrator, ramp_solution_quadrature, sudden_solution
from .numerics import mode_mean
from .schedules import LINEAR, RAMP_RELAX, SUDDEN, QuenchSchedule
from .simulate import log_times
from .thirdq import third_quantization_evolve, thermal_covariance


@dataclass
class OracleCase:
    chain: ChainParams
    bath: BathSpec
    schedule: QuenchSchedule
    times: np.ndarray


@dataclass
class OracleResult:
    case: OracleCase
    curves: dict
    max_deviation: float


def random_case(rng: np.random.Generator, L: int = 128, t_max: float = 100.0) -> OracleCase:
    mu = float(rng.choice([1.0, rng.uniform(0.2, 1.5)]))
    chi = float(rng.choice([1.0, 0.0, rng.uniform(0.2, 1.0)]))
    zeta = int(rng.choice([FERMIONIC, BOSONIC]))
    s = float(rng.choice([0.0, 1.0, 2.0, 3.0] if zeta == FERMIONIC else [1.0, 2.0, 3.0]))
    eps_max = 2.0 * (abs(mu) + 1.0)
    # keep the bath rate below the level scale so the RK4 step is set by eps
    gamma0 = float(rng.uniform(0.01, 0.1)) * min(1.0, eps_max ** (1.0 - s))
    kind = str(rng.choice([SUDDEN, LINEAR, RAMP_RELAX]))
    T_i, T_f = (float(x) for x in rng.uniform(0.0, 6.0, size=2))
    if rng.uniform() < 0.3:
        T_i = 0.0
    if kind == SUDDEN:
        schedule = QuenchSchedule(SUDDEN, T_i, T_f)
        times = log_times(0.5, t_max, 6)
    else:
        tau = float(rng.uniform(2.0, 0.5 * t_max / max(abs(T_f - T_i), 1e-3)))
        relax = 0.5 * t_max if kind == RAMP_RELAX else 0.0
        schedule = QuenchSchedule(kind, T_i, T_f, tau=tau, relax_duration=relax)
        times = log_times(0.5, schedule.duration, 6)
    return OracleCase(ChainParams(mu, chi, L), BathSpec(zeta, s, gamma0), schedule, times)


def run_case(case: OracleCase, tq_tol: float = 1e-9) -> OracleResult:
    chain, bath, sch, times = case.chain, case.bath, case.schedule, case.times
    sp = spectrum(chain, build_grid(chain))
    eps = sp.eps
    P0 = thermal_occupation(eps, sch.T_i)
    t_f = sch.ramp_end
    curves = {}

    tq = third_quantization_evolve(thermal_covariance(chain, sch.T_i), sch, chain, bath, times, tol=tq_tol)
    curves["third_quantization"] = tq.D

    integ = RateIntegrator(eps, bath, sch, tol=1e-11)
    curves["ode"] = np.array([mode_mean(p) for p in integ.integrate(P0, 0.0, times)])

    r_f = rates(bath, eps, sch.T_f)
    if sch.kind == SUDDEN:
        curves["closed_form"] = np.array([mode_mean(sudden_solution(P0, r_f, sp, sch.T_f, t).P) for t in times])
    else:
        P_end = ramp_solution_quadrature(P0, sch, chain, bath, eps=eps).P
        quad = []
        for t in times:
            if t <= t_f:
                P = ramp_solution_quadrature(P0, sch, chain, bath, t_end=t, eps=eps).P
            else:
                P = sudden_solution(P_end, r_f, sp, sch.T_f, t - t_f).P
            quad.append(mode_mean(P))
        curves["quadrature"] = np.array(quad)

    names = list(curves)
    dev = 0.0
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            dev = max(dev, float(np.max(np.abs(curves[a] - curves[b]))))
    return OracleResult(case, curves, dev)


def oracle_triangle(n_cases: int = 20, seed: int = 0, L: int = 128):
    rng = np.random.default_rng(seed)
    return [run_case(random_case(rng, L)) for _ in range(n_cases)]
