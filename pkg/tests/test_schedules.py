import mpmath as mp
import numpy as np
import pytest

from kitaev_quench.bath import T_CAP
from kitaev_quench.chain import ChainParams, build_grid, spectrum
from kitaev_quench.schedules import (
    LINEAR,
    RAMP_RELAX,
    SUDDEN,
    QuenchSchedule,
    SweepSpec,
    initial_occupation,
    temperature_at,
)


def test_temperature_profiles():
    assert temperature_at(QuenchSchedule(LINEAR, 0, 5, tau=100), 250) == pytest.approx(2.5)
    cool = QuenchSchedule(LINEAR, 10, 5, tau=8)
    assert cool.ramp_end == 40
    np.testing.assert_allclose(temperature_at(cool, [40, 41, 1e9]), 5.0)
    assert temperature_at(QuenchSchedule(SUDDEN, 5, 0), 1e-12) == 0.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        QuenchSchedule(LINEAR, 0, 5)
    with pytest.raises(ValueError):
        QuenchSchedule("quadratic", 0, 5, tau=1)
    with pytest.raises(ValueError):
        QuenchSchedule(SUDDEN, -1, 5)
    with pytest.raises(ValueError):
        QuenchSchedule(LINEAR, 0, 5, tau=1, relax_duration=3)
    with pytest.raises(ValueError):
        temperature_at(QuenchSchedule(SUDDEN, 1, 0), -1)
    with pytest.raises(ValueError):
        SweepSpec(QuenchSchedule(LINEAR, 0, 5, tau=1), taus=[2, 1])


def test_ramp_relax_duration():
    s = QuenchSchedule(RAMP_RELAX, 10, 5, tau=2, relax_duration=7)
    assert (s.ramp_end, s.duration, s.is_heating) == (10, 17, False)
    assert s.with_tau(4).ramp_end == 20


def _occ(T_i, pre, post, ks):
    sch = QuenchSchedule(SUDDEN, T_i, T_i, pre_quench=pre)
    return initial_occupation(sch, pre, post, spectrum(pre, ks), spectrum(post, ks))


def test_no_parameter_jump_keeps_state():
    ch = ChainParams(1, 1, 16)
    ks = build_grid(ch)
    np.testing.assert_array_equal(_occ(2.0, ch, ch, ks), 1 / (np.exp(spectrum(ch, ks).eps / 2.0) + 1))


def test_infinite_temperature_fixed_point():
    pre, post = ChainParams(2, 0.3, 16), ChainParams(1, 1, 16)
    np.testing.assert_allclose(_occ(T_CAP, pre, post, build_grid(post)), 0.5, atol=1e-8)


def test_parameter_jump_against_mpmath():
    mp.mp.dps = 50
    pre, post = ChainParams(2, 1, 4), ChainParams(1, 1, 4)
    ks = np.array([np.pi / 2, 0.3, 2.9])
    got = _occ(5.0, pre, post, ks)
    for k, g in zip(ks, got):
        k = mp.mpf(k)

        def angle_eps(mu):
            a, b = mu - mp.cos(k), -mp.sin(k)
            return mp.atan2(b, a) / 2, 2 * mp.sqrt(a * a + b * b)

        bi, ei = angle_eps(2)
        bf, _ = angle_eps(1)
        p_minus = 1 / (mp.exp(ei / 5) + 1)
        want = mp.cos(2 * bi - 2 * bf) * (p_minus - mp.mpf(1) / 2) + mp.mpf(1) / 2
        assert g == pytest.approx(float(want), abs=1e-15)
    # k = pi/2 inputs as written out by hand
    assert spectrum(pre, ks[:1]).eps[0] == pytest.approx(2 * np.sqrt(5))
