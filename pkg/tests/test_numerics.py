import math

import numpy as np
import pytest

from kitaev_quench.numerics import GAUSS_W, KRONROD_W, NODES, QuadratureError, adaptive_gk15, mode_mean


def test_rule_weights():
    assert KRONROD_W.sum() == pytest.approx(2.0, rel=1e-15)
    assert GAUSS_W.sum() == pytest.approx(2.0, rel=1e-15)
    # Kronrod rule is exact for degree 22 polynomials
    assert KRONROD_W @ NODES ** 22 == pytest.approx(2 / 23, rel=1e-13)


def test_many_integrals_at_once():
    freqs = np.array([1.0, 3.0, 10.0])

    def f(x, owner):
        return np.sin(freqs[owner][:, None] * x)

    vals, err = adaptive_gk15(f, np.zeros(3), np.full(3, np.pi), np.arange(3), 3, 1e-13)
    want = (1 - np.cos(freqs * np.pi)) / freqs
    np.testing.assert_allclose(vals, want, atol=1e-12)
    assert np.all(err <= 1e-12)


def test_sharp_layer():
    def f(x, owner):
        return 300 * np.exp(-300 * x)

    edges = np.linspace(0, 1, 9)
    vals, _ = adaptive_gk15(f, edges[:-1], edges[1:], np.zeros(8, int), 1, 1e-12)
    assert vals[0] == pytest.approx(-math.expm1(-300), abs=1e-11)


def test_panel_cap():
    def f(x, owner):
        return np.where(x > 0.3, 1.0, 0.0) * np.random.default_rng(0).uniform(size=x.shape)

    with pytest.raises(QuadratureError):
        adaptive_gk15(f, [0.0], [1.0], [0], 1, 1e-14, max_panels=200)


def test_mode_mean_exact_and_order_independent():
    x = np.array([1e16, 1.0, -1e16, 1.0])
    assert mode_mean(x) == 0.5
    rng = np.random.default_rng(3)
    y = rng.uniform(size=10_001)
    assert mode_mean(y) == mode_mean(y[::-1])
    np.testing.assert_array_equal(mode_mean(np.vstack([y, 2 * y])), [mode_mean(y), mode_mean(2 * y)])
