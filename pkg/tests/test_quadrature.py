import math

import numpy as np
import pytest

from nmorbeam.errors import NonConvergence
from nmorbeam.quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES as KRONROD_NODES, gauss_kronrod_panel, integrate


def test_rule_exactness():
    x, wk, wg = KRONROD_NODES, KRONROD_WEIGHTS, GAUSS_WEIGHTS
    for deg in range(23):
        exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert np.dot(wk, x**deg) == pytest.approx(exact, abs=1e-14)
        if deg <= 13:
            assert np.dot(wg, x**deg) == pytest.approx(exact, abs=1e-14)
    gx, gw = np.polynomial.legendre.leggauss(7)
    assert np.allclose(np.sort(x[wg != 0]), gx, atol=1e-15)
    assert np.allclose(wg[wg != 0][np.argsort(x[wg != 0])], gw, atol=1e-15)


def test_single_panel_polynomial():
    val, err = gauss_kronrod_panel(lambda t: t**5 - 3 * t**2, 0.0, 2.0)
    assert val == pytest.approx(64 / 6 - 8, rel=1e-14)
    assert err < 1e-12


@pytest.mark.parametrize("f, a, b, exact", [
    (np.exp, 0.0, 1.0, math.e - 1),
    (lambda t: 1 / (1 + t * t), -50.0, 50.0, 2 * math.atan(50.0)),
    (lambda t: np.exp(-t * t), -30.0, 30.0, math.sqrt(math.pi)),
    (np.sqrt, 0.0, 1.0, 2 / 3),
])
def test_integrate_known(f, a, b, exact):
    res = integrate(f, a, b, rel_tol=1e-12)
    assert res.value == pytest.approx(exact, rel=1e-11)
    assert abs(res.value - exact) <= max(10 * res.error, 1e-14)


def test_breakpoints_help_narrow_peak():
    f = lambda t: np.exp(-((t - 0.3) / 1e-4) ** 2)
    res = integrate(f, -1.0, 1.0, rel_tol=1e-12, breakpoints=(0.3 - 1e-3, 0.3 - 3e-4, 0.3, 0.3 + 3e-4, 0.3 + 1e-3))
    assert res.value == pytest.approx(math.sqrt(math.pi) * 1e-4, rel=1e-11)


def test_requires_ordered_limits():
    with pytest.raises(ValueError):
        integrate(np.exp, 1.0, 0.0)


def test_panel_cap_raises():
    with pytest.raises(NonConvergence):
        integrate(lambda t: np.sin(1 / np.maximum(np.abs(t), 1e-300)), -1.0, 1.0,
                  rel_tol=1e-15, max_panels=16)
