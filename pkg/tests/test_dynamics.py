import math

import mpmath as mp
import numpy as np
import pytest

from kitaev_quench.bath import FERMIONIC, BOSONIC, T_CAP, BathSpec, rates, thermal_occupation
from kitaev_quench.chain import ChainParams, build_grid, spectrum
from kitaev_quench.dynamics import (
    RateIntegrator,
    excitation_density,
    ramp_solution_ode,
    ramp_solution_quadrature,
    sudden_solution,
    thermal_density,
)
from kitaev_quench.numerics import mode_mean
from kitaev_quench.schedules import LINEAR, SUDDEN, QuenchSchedule
from kitaev_quench.simulate import log_times, simulate

FERMI1 = BathSpec(FERMIONIC, 1.0, 0.01)
ONE = np.array([1.0])


def test_density_trivial():
    assert excitation_density(np.full(10, 0.5)) == 0.5
    assert excitation_density(np.zeros(10)) == 0.0


def test_thermal_density_against_mpmath():
    mp.mp.dps = 30
    ch = ChainParams(1.0, 1.0, 10_000)
    ks = build_grid(ch)
    # the spectrum is even in k, so the positive half is enough
    want = mp.fsum(1 / (mp.exp(2 * mp.sqrt((1 - mp.cos(k)) ** 2 + mp.sin(k) ** 2) / 5) + 1) for k in ks[ks > 0])
    assert thermal_density(ch, 5.0) == pytest.approx(float(want / (ch.L // 2)), rel=1e-14)
    assert thermal_density(ch, 0.0) == 0.0
    assert thermal_density(ch, T_CAP) == pytest.approx(0.5, abs=1e-8)
    off = thermal_density(ChainParams(0.5, 1.0, 10_000), 5.0)
    assert 0.0 < off < 0.5


def test_single_mode_sudden():
    sp = spectrum(ChainParams(1, 1, 2), np.array([np.pi / 2]))
    bath = BathSpec(FERMIONIC, 0.0, 0.01)
    r = rates(bath, sp.eps, 0.0)
    P = sudden_solution(np.array([0.5]), r, sp, 0.0, 100.0).P
    assert P[0] == pytest.approx(0.5 * math.exp(-2), rel=1e-14)
    np.testing.assert_array_equal(sudden_solution(np.array([0.3]), r, sp, 0.0, 0.0).P, [0.3])


def test_no_quench_no_excess():
    ch = ChainParams(1, 1, 64)
    s = simulate(ch, FERMI1, QuenchSchedule(SUDDEN, 2.0, 2.0), log_times(0.1, 100, 5))
    np.testing.assert_allclose(s.excess, 0.0, atol=1e-16)


def test_quadrature_vs_ode_single_mode():
    sch = QuenchSchedule(LINEAR, 0.0, 5.0, tau=100.0)
    ch = ChainParams(1, 1, 2)
    P0 = thermal_occupation(ONE, 0.0)
    q = ramp_solution_quadrature(P0, sch, ch, FERMI1, eps=ONE).P
    o = ramp_solution_ode(P0, sch, ch, FERMI1, [sch.ramp_end], ode_tol=1e-12, eps=ONE).P_ramp_end
    assert abs(q[0] - o[0]) <= 1e-9
    # independent check by mpmath quadrature of the integral solution
    mp.mp.dps = 30
    g, t = mp.mpf("0.01"), mp.mpf(500)
    want = mp.quad(lambda u: 2 * g * mp.exp(-2 * g * (t - u)) / (mp.exp(1 / (u / 100)) + 1) if u > 0 else 0, [0, 100, t])
    assert q[0] == pytest.approx(float(want), abs=1e-12)


def test_quadrature_short_ramp_limit():
    sch = QuenchSchedule(LINEAR, 0.0, 5.0, tau=1e-9)
    P0 = np.array([0.2])
    P = ramp_solution_quadrature(P0, sch, ChainParams(1, 1, 2), FERMI1, eps=ONE).P
    assert P[0] == pytest.approx(0.2, abs=1e-9)


def test_full_grid_quadrature_vs_ode():
    ch = ChainParams(1.0, 1.0, 10_000)
    sch = QuenchSchedule(LINEAR, 0.0, 5.0, tau=256.0)
    eps = spectrum(ch, build_grid(ch)).eps
    P0 = thermal_occupation(eps, 0.0)
    q = mode_mean(ramp_solution_quadrature(P0, sch, ch, FERMI1, eps=eps).P)
    o = ramp_solution_ode(P0, sch, ch, FERMI1, [sch.ramp_end], eps=eps)
    assert abs(q - o.D[-1]) <= 1e-9


@pytest.mark.parametrize("zeta", [FERMIONIC, BOSONIC])
def test_bosonic_and_fermionic_quadrature_small_grid(zeta):
    ch = ChainParams(1.0, 1.0, 32)
    bath = BathSpec(zeta, 2.0, 0.02)
    sch = QuenchSchedule(LINEAR, 4.0, 1.0, tau=20.0)
    eps = spectrum(ch, build_grid(ch)).eps
    P0 = thermal_occupation(eps, 4.0)
    q = ramp_solution_quadrature(P0, sch, ch, bath, eps=eps).P
    o = ramp_solution_ode(P0, sch, ch, bath, [sch.ramp_end], ode_tol=1e-12, eps=eps).P_ramp_end
    np.testing.assert_allclose(q, o, atol=1e-9)


def test_integrator_frozen_temperature_matches_closed_form():
    eps = np.array([0.1, 1.0, 3.0])
    bath = BathSpec(BOSONIC, 2.0, 0.05)
    sch = QuenchSchedule(SUDDEN, 3.0, 3.0)
    P0 = np.array([0.5, 0.1, 0.0])
    times = np.array([1.0, 10.0, 100.0])
    rows = RateIntegrator(eps, bath, sch, tol=1e-12).integrate(P0, 0.0, times)
    g = rates(bath, eps, 3.0).gamma_total
    P_th = thermal_occupation(eps, 3.0)
    for t, row in zip(times, rows):
        np.testing.assert_allclose(row, P_th + np.exp(-2 * g * t) * (P0 - P_th), atol=1e-12)


def test_decoupled_mode_constant():
    # gamma = gamma0 * 0**s = 0 for s > 0
    eps = np.array([0.0, 1.0])
    sch = QuenchSchedule(LINEAR, 0.0, 2.0, tau=10.0)
    rows = RateIntegrator(eps, FERMI1, sch, tol=1e-10).integrate(np.array([0.3, 0.0]), 0.0, [20.0])
    assert rows[-1][0] == 0.3


def test_ode_series_bookkeeping():
    ch = ChainParams(1.0, 1.0, 64)
    sch = QuenchSchedule("ramp_relax", 0.0, 2.0, tau=10.0, relax_duration=50.0)
    s = simulate(ch, FERMI1, sch, log_times(0.1, sch.duration, 10))
    assert s.t_ramp_end == 20.0
    assert s.T[-1] == 2.0 and s.D_th_inst[-1] == s.D_th_final
    with pytest.raises(ValueError):
        simulate(ch, FERMI1, sch, [1.0, sch.duration * 2])


def test_lindblad_warning():
    ch = ChainParams(1.0, 1.0, 16)
    with pytest.warns(RuntimeWarning, match="weak-coupling"):
        simulate(ch, BathSpec(FERMIONIC, 1.0, 0.5), QuenchSchedule(SUDDEN, 1.0, 0.0), [1.0])
