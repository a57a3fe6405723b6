import math

import mpmath as mp
import numpy as np
import pytest

from kitaev_quench.chain import ChainParams, build_grid, gap_info, spectrum


def test_grid_small_cases():
    np.testing.assert_allclose(build_grid(ChainParams(1, 1, 4)), np.pi * np.array([-3, -1, 1, 3]) / 4)
    np.testing.assert_allclose(build_grid(ChainParams(1, 1, 2)), [-np.pi / 2, np.pi / 2])


@pytest.mark.parametrize("L", [2, 8, 128, 10_000])
def test_grid_symmetric_and_excludes_zero_and_pi(L):
    ks = build_grid(ChainParams(1, 1, L))
    assert ks.size == L
    np.testing.assert_array_equal(ks, -ks[::-1])
    assert np.min(np.abs(ks)) == pytest.approx(np.pi / L)
    assert np.max(np.abs(ks)) < np.pi


@pytest.mark.parametrize("L", [0, 3, -4, 2.5, True])
def test_bad_lengths_rejected(L):
    with pytest.raises(ValueError):
        ChainParams(1.0, 1.0, L)


def test_spectrum_values():
    sp = spectrum(ChainParams(1, 1, 4), np.array([np.pi / 2]))
    assert sp.eps[0] == pytest.approx(2 * math.sqrt(2), rel=1e-15)
    ks = np.linspace(0.01, 3.0, 50)
    np.testing.assert_allclose(spectrum(ChainParams(1, 0, 4), ks).eps, 4 * np.sin(ks / 2) ** 2, rtol=1e-12)


def test_bogoliubov_angle_high_precision():
    mp.mp.dps = 50
    want = float(mp.atan2(-1, 2) / 2)
    beta = spectrum(ChainParams(2, 1, 4), np.array([np.pi / 2])).beta[0]
    assert beta == pytest.approx(want, abs=1e-15)
    assert want == pytest.approx(-0.231824, abs=5e-7)
    assert math.tan(2 * beta) == pytest.approx(-0.5, rel=1e-14)


def test_spectrum_against_mpmath():
    mp.mp.dps = 50
    rng = np.random.default_rng(1)
    for _ in range(20):
        mu, chi, k = rng.uniform(-2, 2), rng.uniform(0, 2), rng.uniform(-np.pi, np.pi)
        sp = spectrum(ChainParams(mu, chi, 4), np.array([k]))
        a = mp.mpf(mu) - mp.cos(k)
        b = -mp.mpf(chi) * mp.sin(k)
        assert sp.eps[0] == pytest.approx(float(2 * mp.sqrt(a * a + b * b)), rel=1e-14)
        assert sp.beta[0] == pytest.approx(float(mp.atan2(b, a) / 2), abs=1e-14)


def test_gap_info():
    g = gap_info(ChainParams(1, 1, 4))
    assert g.is_critical and g.gap_closing_k == 0.0 and g.z == 1
    g = gap_info(ChainParams(1, 0, 4))
    assert g.is_critical and g.gap_closing_k == 0.0 and g.z == 2
    assert not gap_info(ChainParams(0.5, 1, 4)).is_critical
    g = gap_info(ChainParams(-1, 1, 4))
    assert g.is_critical and g.gap_closing_k == pytest.approx(math.pi)


def test_small_k_asymptotics():
    for chi in (1.0, 0.5):
        ch = ChainParams(1, chi, 10_000)
        ks = build_grid(ch)
        k = ks[ks > 0][:2]
        eps = spectrum(ch, k).eps
        assert np.all(np.abs(eps - 2 * chi * k) / eps < 1e-2)
    ch = ChainParams(1, 0, 10_000)
    ks = build_grid(ch)
    k = ks[ks > 0][:2]
    eps = spectrum(ch, k).eps
    assert np.all(np.abs(eps - k ** 2) / eps < 1e-2)
