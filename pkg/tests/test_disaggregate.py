import math

import numpy as np
import pytest
from scipy import special

from aggmix import specfun
from aggmix.disaggregate import (
    acvf_convolution,
    compute_cstar,
    fi_times_analytic,
    mixture_cross_constant,
    product_fi_density_raw,
    product_mixture_numeric,
    product_noise_variance,
    verify_product_asymptotics,
)
from aggmix.errors import DomainError, InconclusiveError, SupportError
from aggmix.mixture import (
    NoiseSpec,
    fi_mixture,
    product_fi_mixture_closed,
    semiparametric_mixture,
    sfi_mixture,
    uniform_mixture,
)
from aggmix.spectral import acvf_from_mixture, mixture_spectral, uniform_closed_spectral


def cstar_monte_carlo(d1, d2, n=10_000_000, seed=7, chunk=1_000_000):
    """C* by importance sampling with Beta(d, 2-2d) proposals; returns (mean, stderr)."""
    rng = np.random.default_rng(seed)
    norm = special.beta(d1, 2 - 2 * d1) * special.beta(d2, 2 - 2 * d2)
    s = s2 = 0.0
    for _ in range(n // chunk):
        x = rng.beta(d1, 2 - 2 * d1, chunk)
        y = rng.beta(d2, 2 - 2 * d2, chunk)
        w = (1 + x) * (1 + y) / (1 + x * y)
        s += w.sum()
        s2 += (w * w).sum()
    mean = s / n
    var = s2 / n - mean * mean
    return norm * mean, norm * math.sqrt(var / n)


# -- constants ---------------------------------------------------------------------


def test_cstar_symmetry():
    assert compute_cstar(0.2, 0.35) == pytest.approx(compute_cstar(0.35, 0.2), rel=1e-12)


def test_cstar_monte_carlo_oracle():
    value = compute_cstar(0.25, 0.25)
    mc, se = cstar_monte_carlo(0.25, 0.25)
    assert abs(value - mc) <= 3 * se
    assert se / mc < 1e-3


def test_cross_constant_factorizes():
    d1 = d2 = 0.25
    cross = mixture_cross_constant(fi_mixture(d1)[0], sfi_mixture(d2)[0])
    expected = specfun.fi_constant(d1) * specfun.fi_constant(d2) * compute_cstar(d1, d2)
    assert cross == pytest.approx(expected, rel=1e-9)


def test_noise_variance_two_forms():
    d1, d2 = 0.2, 0.3
    (_, n1), (_, n2) = fi_mixture(d1), sfi_mixture(d2)
    cstar = compute_cstar(d1, d2)
    c_low = specfun.fi_constant(d1) * specfun.fi_constant(d2) * cstar
    noise = product_noise_variance(n1, n2, c_low)
    sine_form = math.sin(math.pi * d1) * math.sin(math.pi * d2) * cstar / (2 * math.pi**3)
    assert noise.variance == pytest.approx(sine_form, rel=1e-12)
    assert noise.variance == pytest.approx(n1.variance * n2.variance * c_low / (2 * math.pi), rel=1e-14)


def test_cstar_domain():
    with pytest.raises(DomainError):
        compute_cstar(0.0, 0.3)


# -- numeric product mixture -------------------------------------------------------------


@pytest.fixture(scope="module")
def fi_sfi_product():
    return product_mixture_numeric(*fi_mixture(0.2), *sfi_mixture(0.3))


def test_product_result_invariants(fi_sfi_product):
    r = fi_sfi_product
    assert r.phi.total_mass() == pytest.approx(1.0, abs=1e-6)
    assert 0 < r.c_star < math.inf
    (_, n1), (_, n2) = fi_mixture(0.2), sfi_mixture(0.3)
    assert r.noise.variance == pytest.approx(n1.variance * n2.variance * r.c_star / (2 * math.pi), rel=1e-8)
    assert np.all(r.phi.pdf(r.grid) >= 0)
    assert r.phi.support == (-1.0, 1.0)


def test_product_matches_closed_form(fi_sfi_product):
    closed, noise = product_fi_mixture_closed(0.2, 0.3)
    x = np.concatenate([np.linspace(-0.9, -0.1, 41), np.linspace(0.1, 0.9, 41)])
    assert np.allclose(fi_sfi_product.phi.pdf(x), closed.pdf(x), rtol=1e-5, atol=0)
    assert fi_sfi_product.noise.variance == pytest.approx(noise.variance, rel=1e-8)


def test_closed_density_pieces_match_raw_assembly():
    closed, _ = product_fi_mixture_closed(0.25, 0.25)
    x = np.concatenate([np.linspace(-0.99, -0.01, 50), np.linspace(0.01, 0.99, 50)])
    assert np.allclose(closed.pdf(x), product_fi_density_raw(x, 0.25, 0.25), rtol=1e-12, atol=0)


def test_product_round_trip_spectrum(fi_sfi_product):
    r = fi_sfi_product
    f = mixture_spectral(r.phi, r.noise)
    f1 = mixture_spectral(*fi_mixture(0.2))
    f2 = mixture_spectral(*sfi_mixture(0.3))
    lam = np.linspace(0.1, math.pi - 0.1, 64)
    assert np.max(np.abs(f(lam) / (f1(lam) * f2(lam)) - 1)) <= 1e-4


def test_product_is_deterministic():
    a = product_mixture_numeric(*fi_mixture(0.3), *sfi_mixture(0.1))
    b = product_mixture_numeric(*fi_mixture(0.3), *sfi_mixture(0.1))
    assert np.array_equal(a.phi.pdf(a.grid), b.phi.pdf(b.grid))


def test_product_semiparametric_factors():
    phi1 = semiparametric_mixture(0.3, 0.2, lambda x: 1 + x, support=(0.0, 1.0))
    phi2 = uniform_mixture(-0.7, -0.1)
    r = product_mixture_numeric(phi1, NoiseSpec(1.0), phi2, NoiseSpec(2.0))
    assert r.phi.total_mass() == pytest.approx(1.0, abs=1e-6)
    f = mixture_spectral(r.phi, r.noise)
    target = mixture_spectral(phi1, NoiseSpec(1.0)) * mixture_spectral(phi2, NoiseSpec(2.0))
    lam = np.linspace(0.1, math.pi - 0.1, 16)
    assert np.max(np.abs(f(lam) / target(lam) - 1)) <= 1e-4


@pytest.mark.parametrize("phi1,phi2", [
    (lambda: uniform_mixture(-0.2, 0.5), lambda: sfi_mixture(0.3)[0]),
    (lambda: fi_mixture(0.3)[0], lambda: uniform_mixture(-0.5, 0.2)),
    (lambda: sfi_mixture(0.3)[0], lambda: fi_mixture(0.3)[0]),
])
def test_support_hypothesis_enforced(phi1, phi2):
    with pytest.raises(SupportError):
        product_mixture_numeric(phi1(), NoiseSpec(1.0), phi2(), NoiseSpec(1.0))


def test_product_endpoints_follow_factors(fi_sfi_product):
    # phi behaves as phi1 near +1 and as phi2 near -1: the ratios settle to constants
    phi = fi_sfi_product.phi
    u = np.array([1e-4, 1e-6, 1e-8])
    r_plus = phi.pdf(1 - u) / fi_mixture(0.2)[0].pdf(1 - u)
    r_minus = phi.pdf(-1 + u) / sfi_mixture(0.3)[0].pdf(-1 + u)
    assert np.ptp(r_plus) / r_plus.mean() < 1e-3
    assert np.ptp(r_minus) / r_minus.mean() < 1e-3


# -- FI times analytic --------------------------------------------------------------------


@pytest.fixture(scope="module")
def fi_uniform():
    return fi_times_analytic(0.3, uniform_mixture(-0.6, -0.2))


def test_fi_times_analytic_support(fi_uniform):
    lo, hi = fi_uniform.phi.support
    assert lo >= -0.6 and hi <= 1.0
    assert fi_uniform.phi(-0.7) == 0.0


def test_fi_times_analytic_spectral_ratio(fi_uniform):
    f = mixture_spectral(fi_uniform.phi, fi_uniform.noise)
    lam = np.linspace(0.1, math.pi - 0.1, 32)
    fi = (2 * np.sin(lam / 2)) ** (-0.6) / (2 * math.pi)
    g = uniform_closed_spectral(-0.6, -0.2)(lam)
    assert np.max(np.abs(f(lam) / fi / g - 1)) <= 1e-4


def test_fi_times_narrow_uniform():
    r = fi_times_analytic(0.25, uniform_mixture(-0.21, -0.2))
    assert r.phi.total_mass() == pytest.approx(1.0, abs=1e-6)
    assert np.all(r.phi.pdf(r.grid) >= 0)


@pytest.mark.parametrize("make", [
    lambda: uniform_mixture(-0.5, 0.1),
    lambda: sfi_mixture(0.2)[0],
])
def test_fi_times_analytic_rejects(make):
    with pytest.raises(SupportError):
        fi_times_analytic(0.3, make())


# -- asymptotics --------------------------------------------------------------------------


def test_product_asymptotics():
    chk = verify_product_asymptotics(0.2, 0.3)
    assert chk.passed
    assert chk.exp0p == pytest.approx(-0.5, abs=0.02)
    assert chk.exp1 == pytest.approx(0.6, abs=0.02)
    assert chk.expm1 == pytest.approx(0.4, abs=0.02)
    ratio = chk.prefactors["0+"] / chk.prefactors["0-"]
    assert ratio == pytest.approx(math.sin(0.2 * math.pi) / math.sin(0.3 * math.pi), rel=0.02)


# -- ACVF convolution ----------------------------------------------------------------------


def test_acvf_convolution(fi_uniform):
    phi1, n1 = fi_mixture(0.3)
    g = uniform_mixture(-0.6, -0.2)
    g1 = acvf_from_mixture(phi1, n1, 200).values
    g2 = acvf_from_mixture(g, NoiseSpec(1.0), 80).values
    # the analytic factor's terms are below 1e-12 well before lag 80
    assert np.max(np.abs(g1[:81] * g2)[70:]) < 1e-12
    conv = acvf_convolution(g1, g2, 10)
    direct = acvf_from_mixture(fi_uniform.phi, fi_uniform.noise, 10).values
    assert np.max(np.abs(conv / direct - 1)) <= 1e-6


def test_acvf_convolution_brute_force():
    rng = np.random.default_rng(0)
    g1, g2 = rng.normal(size=30), rng.normal(size=12)
    got = acvf_convolution(g1, g2, 5)
    for h in range(6):
        ref = sum(g1[abs(j + h)] * g2[abs(j)] for j in range(-11, 12)) / (2 * math.pi)
        assert got[h] == pytest.approx(ref, rel=1e-13)


def test_acvf_convolution_too_short():
    with pytest.raises(InconclusiveError):
        acvf_convolution(np.ones(5), np.ones(5), 5)


def test_closed_and_numeric_agree_at_a_point():
    closed, _ = product_fi_mixture_closed(0.2, 0.2)
    numeric = product_mixture_numeric(*fi_mixture(0.2), *sfi_mixture(0.2)).phi
    assert numeric(0.5) == pytest.approx(closed(0.5), rel=1e-6)
    assert numeric(-0.5) == pytest.approx(closed(-0.5), rel=1e-6)
