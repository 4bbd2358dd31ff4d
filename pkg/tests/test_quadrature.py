import math

import mpmath as mp
import numpy as np
import pytest

from aggmix.errors import QuadratureError
from aggmix.quadrature import geometric_breaks, integrate_endpoint, integrate_interval


@pytest.mark.parametrize("alpha", [-0.9, -0.5, 0.0, 0.3, 2.0])
def test_endpoint_power_weight(alpha):
    r = integrate_endpoint(lambda s: np.ones_like(s), 1.0, alpha)
    assert r.value == pytest.approx(1.0 / (alpha + 1.0), rel=1e-14)


@pytest.mark.parametrize("a,b", [(-0.7, 0.4), (0.25, -0.6), (-0.95, -0.95)])
def test_interval_beta_integral(a, b):
    r = integrate_interval(lambda x, dl, dr: np.ones_like(x), 0.0, 1.0, a, b)
    expected = math.gamma(a + 1) * math.gamma(b + 1) / math.gamma(a + b + 2)
    assert r.value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("eps", [1e-2, 1e-6, 1e-12])
def test_narrow_lorentzian_at_endpoint(eps):
    # int_0^1 s^-0.4 / (s^2 + eps^2) ds against mpmath
    g = lambda s: 1.0 / (s * s + eps * eps)
    r = integrate_endpoint(g, 1.0, -0.4, breaks=geometric_breaks(eps, 1.0), rtol=1e-12)
    ref = mp.quad(lambda s: s ** mp.mpf(-0.4) / (s * s + eps * eps), [0, eps, 1])
    assert r.value == pytest.approx(float(ref), rel=1e-10)


def test_batch_members_each_meet_tolerance():
    eps = np.array([1e-1, 1e-4, 1e-9])[:, None]
    r = integrate_endpoint(lambda s: 1.0 / (s[None, :] ** 2 + eps**2), 1.0, 0.0,
                           breaks=geometric_breaks(1e-9, 1.0), rtol=1e-12)
    exact = np.arctan(1.0 / eps[:, 0]) / eps[:, 0]
    assert np.allclose(r.value, exact, rtol=1e-11, atol=0)


def test_interval_receives_exact_distances():
    seen = {}

    def f(x, dl, dr):
        seen["ok"] = np.allclose(dl + dr, 1.0, rtol=0, atol=1e-15) and np.all(dr > 0)
        return np.ones_like(x)

    integrate_interval(f, 0.0, 1.0, 0.0, -0.5)
    assert seen["ok"]


def test_non_integrable_exponent_raises():
    with pytest.raises(QuadratureError):
        integrate_endpoint(lambda s: np.ones_like(s), 1.0, -1.0)


def test_unreachable_tolerance_raises():
    # a jump the rule cannot resolve to 1e-15 with a tiny interval budget
    with pytest.raises(QuadratureError):
        integrate_endpoint(lambda s: np.where(s < 1 / 3, 0.0, 1.0), 1.0, 0.0, rtol=1e-15, max_intervals=20)


def test_geometric_breaks():
    b = geometric_breaks(0.01, 1.0, below=2)
    assert b[0] == pytest.approx(0.0025)
    assert max(b) < 1.0
    assert geometric_breaks(0.0, 1.0) == []
