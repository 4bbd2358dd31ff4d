"""Mixture densities of product spectral densities.

Given mixtures ``phi1`` on ``[0, 1]`` and ``phi2`` on ``[-1, 0]`` with
aggregate spectra ``f1`` and ``f2``, the product ``f1 * f2`` is again an
aggregate spectrum.  Its mixture density is

    phi(x) = (phi1(x) I2(x) + phi2(x) I1(x)) / C_*

with ``I_k(x) = int phi_k(y) x / ((1 - x y)(x - y)) dy`` and
``C_* = int int phi1(x) phi2(y) / (1 - x y) dy dx``.  The supports do not
overlap, so on each lobe only one term survives and the density is the
factor's own density times a smooth positive multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from . import specfun
from .errors import DomainError, InconclusiveError, SupportError
from .fitting import loglog_fit
from .mixture import (
    MixtureDensity,
    NoiseSpec,
    Piece,
    check_admissibility,
    fi_mixture,
    product_fi_constant,
)
from .quadrature import integrate_interval

DEFAULT_NODES = 512
SMALLEST_NODE = 1e-12
CSTAR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProductMixtureResult:
    """Mixture density of a product spectrum with its constants."""

    phi: MixtureDensity
    c_star: float
    noise: NoiseSpec
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def grid(self) -> np.ndarray:
        return self.phi.meta["grid"]


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def _check_d(d: float, name: str) -> float:
    d = float(d)
    if not 0.0 < d < 0.5:
        raise DomainError(f"{name} must lie in (0, 1/2), got {d}")
    return d


def compute_cstar(d1: float, d2: float, *, rtol: float = CSTAR_RTOL) -> float:
    """Double integral

    ``C* = int_0^1 int_0^1 x^(d1-1) (1-x)^(1-2d1) (1+x) y^(d2-1) (1-y)^(1-2d2) (1+y) / (1 + x y) dy dx``.

    Both integrals use Gauss-Jacobi weights for the four endpoint powers;
    the inner integral is evaluated for all outer nodes at once.
    """
    d1 = _check_d(d1, "d1")
    d2 = _check_d(d2, "d2")

    def outer(x, dlx, drx):
        def inner(y, dly, dry):
            return (1.0 + y)[None, :] / (1.0 + x[:, None] * y[None, :])

        r = integrate_interval(inner, 0.0, 1.0, d2 - 1.0, 1.0 - 2.0 * d2, rtol=0.1 * rtol)
        return (1.0 + x) * np.atleast_1d(r.value)

    return float(integrate_interval(outer, 0.0, 1.0, d1 - 1.0, 1.0 - 2.0 * d1, rtol=rtol).value)


def product_noise_variance(noise1: NoiseSpec, noise2: NoiseSpec, c_star: float) -> NoiseSpec:
    """``sigma1^2 sigma2^2 C_* / (2 pi)``."""
    return NoiseSpec(noise1.variance * noise2.variance * c_star / (2.0 * math.pi))


def mixture_cross_constant(phi1: MixtureDensity, phi2: MixtureDensity, *, rtol: float = 1e-11) -> float:
    """``C_* = int int phi1(x) phi2(y) / (1 - x y) dy dx``."""

    def outer(x, omx, opx):
        r = phi2.integrate(lambda y, omy, opy: 1.0 / (1.0 - x[:, None] * y[None, :]), rtol=0.1 * rtol)
        return np.atleast_1d(r.value)

    return float(phi1.integrate(outer, rtol=rtol).value)


# ---------------------------------------------------------------------------
# general product construction
# ---------------------------------------------------------------------------


def _lobe_nodes(lo: float, hi: float, n: int, touches_zero: bool) -> np.ndarray:
    """Chebyshev points on ``[lo, hi]`` (in ``|x|``) plus a geometric cluster at 0."""
    k = np.arange(n)
    cheb = lo + (hi - lo) * 0.5 * (1.0 - np.cos(math.pi * (k + 0.5) / n))
    nodes = [cheb]
    if touches_zero:
        first = cheb[0]
        geo = first * 2.0 ** -np.arange(1.0, 200.0)
        nodes.append(geo[geo >= SMALLEST_NODE])
    out = np.unique(np.concatenate(nodes))
    return out[(out > 0.0) & (out <= hi)]


def _zero_exponent(phi: MixtureDensity, side: int) -> float | None:
    """Exponent of ``phi`` at the origin approached from ``side`` (+1 or -1), or ``None``."""
    for p in phi.pieces:
        if side < 0 and p.b == 0.0:
            return p.beta
        if side > 0 and p.a == 0.0:
            return p.alpha
    return None


def _multiplier(lobe: MixtureDensity, other: MixtureDensity, sign: int, c_star: float,
                n_nodes: int, rtol: float):
    """Tabulate ``w(x) = I_other(x) / C_*`` on one lobe and return a smooth interpolant.

    ``sign`` is +1 for the lobe in ``[0, 1]`` and -1 for ``[-1, 0]``.  When
    the lobe reaches the origin, ``w(x) ~ |x|^rho`` with ``rho = 1 + e`` if
    the other density behaves like ``|y|^e`` at the origin and ``rho = 1``
    otherwise; the power goes to the quadrature weight and only
    ``w / |x|^rho`` is interpolated.
    """
    lo, hi = lobe.support
    a_lo, a_hi = (lo, hi) if sign > 0 else (-hi, -lo)
    touches_zero = a_lo == 0.0
    e_other = _zero_exponent(other, -sign)
    rho = (1.0 + (e_other if e_other is not None else 0.0)) if touches_zero else 0.0
    u = _lobe_nodes(a_lo, a_hi, n_nodes, touches_zero)
    x = sign * u

    def kernel(y, omy, opy):
        xx = x[:, None]
        return (u[:, None] ** (1.0 - rho)) / ((1.0 - xx * y[None, :]) * (sign * (xx - y[None, :])))

    r = other.integrate(kernel, rtol=rtol, zero_scale=float(u.min()))
    omega = np.atleast_1d(r.value) / c_star
    if np.any(omega <= 0.0) or np.any(~np.isfinite(omega)):
        raise DomainError("product multiplier is not positive; inputs are not admissible")
    spline = CubicSpline(np.log(u), np.log(omega))
    lmin, lmax = math.log(u.min()), math.log(u.max())

    def interp(absx):
        t = np.clip(np.log(np.maximum(absx, 1e-300)), lmin, lmax)
        return np.exp(spline(t))

    return interp, rho, u, omega


def product_mixture_numeric(
    phi1: MixtureDensity,
    noise1: NoiseSpec,
    phi2: MixtureDensity,
    noise2: NoiseSpec,
    *,
    n_nodes: int = DEFAULT_NODES,
    rtol: float = 1e-11,
) -> ProductMixtureResult:
    """Mixture density of ``f1 * f2`` from the factor mixtures.

    Parameters
    ----------
    phi1, noise1 : mixture on ``[0, 1]`` and its noise.
    phi2, noise2 : mixture on ``[-1, 0]`` and its noise.
    n_nodes : int
        Chebyshev nodes per lobe for the tabulated multiplier; a geometric
        cluster down to ``1e-12`` is added next to the origin.

    Returns
    -------
    ProductMixtureResult
        ``phi`` keeps the factors' endpoint powers exactly and carries the
        node grid in ``phi.meta["grid"]`` for CSV export.
    """
    lo1, hi1 = phi1.support
    lo2, hi2 = phi2.support
    if lo1 < 0.0:
        raise SupportError(f"first factor must live in [0, 1], support is {phi1.support}")
    if hi2 > 0.0:
        raise SupportError(f"second factor must live in [-1, 0], support is {phi2.support}")
    for ph in (phi1, phi2):
        if not check_admissibility(ph).admissible:
            raise DomainError("factor mixture is not admissible")

    c_star = mixture_cross_constant(phi1, phi2)
    if not (math.isfinite(c_star) and c_star > 0.0):
        raise DomainError(f"cross constant C_* = {c_star} is not positive and finite")
    w1, rho1, u1, om1 = _multiplier(phi1, phi2, +1, c_star, n_nodes, rtol)
    w2, rho2, u2, om2 = _multiplier(phi2, phi1, -1, c_star, n_nodes, rtol)

    # on a lobe touching 0, |x| is the distance to 0, so the |x|^rho part of
    # the multiplier is exact in the quadrature weight
    pieces = []
    for p in phi2.pieces:
        extra = rho2 if p.b == 0.0 else 0.0
        pieces.append(Piece(p.a, p.b, p.alpha, p.beta + extra,
                            (lambda x, dl, dr, s=p.smooth: s(x, dl, dr) * w2(np.abs(x))), p.nodes))
    for p in phi1.pieces:
        extra = rho1 if p.a == 0.0 else 0.0
        pieces.append(Piece(p.a, p.b, p.alpha + extra, p.beta,
                            (lambda x, dl, dr, s=p.smooth: s(x, dl, dr) * w1(np.abs(x))), p.nodes))

    em = phi2.endpoint_exponents[0]
    ep = phi1.endpoint_exponents[1]
    grid = np.concatenate([-u2[::-1], u1])
    tmp = MixtureDensity("product", {}, tuple(pieces), (em, ep))
    values = tmp.pdf(grid)
    meta = {
        "grid": grid,
        "values": values,
        "rho": (rho2, rho1),
        "factors": (phi1, phi2),
    }
    phi = MixtureDensity(
        "product",
        {"factor1": phi1.kind, "factor2": phi2.kind},
        tuple(pieces),
        (em, ep),
        meta,
    )
    noise = product_noise_variance(noise1, noise2, c_star)
    mass = phi.total_mass()
    return ProductMixtureResult(phi, c_star, noise, {"mass": mass, "rtol": rtol, "n_nodes": n_nodes})


def fi_times_analytic(
    d: float,
    phi_g: MixtureDensity,
    noise_g: NoiseSpec | None = None,
    **kwargs,
) -> ProductMixtureResult:
    """Mixture density of ``(1/2pi) |1 - e^{i lambda}|^(-2d) g(lambda)``.

    ``g`` is the aggregate spectrum of ``phi_g`` (with ``noise_g``,
    default unit variance), which must live in ``[-a_*, 0]`` with
    ``a_* < 1`` so that ``g`` is analytic.
    """
    d = _check_d(d, "d")
    lo, hi = phi_g.support
    if hi > 0.0:
        raise SupportError(f"analytic factor must live in [-a_*, 0], support is {phi_g.support}")
    if lo <= -1.0:
        raise SupportError("analytic factor must stay away from -1")
    phi1, noise1 = fi_mixture(d)
    return product_mixture_numeric(phi1, noise1, phi_g, noise_g or NoiseSpec(1.0), **kwargs)


# ---------------------------------------------------------------------------
# closed-form product asymptotics
# ---------------------------------------------------------------------------


def product_fi_density_raw(x, d1: float, d2: float, cstar: float | None = None) -> np.ndarray:
    """The closed product density assembled directly from ``G(x; d)``.

    Independent of the piece representation used by
    :func:`~aggmix.mixture.product_fi_mixture_closed`; used by the
    asymptotic checks.
    """
    cstar = compute_cstar(d1, d2) if cstar is None else cstar
    c12 = product_fi_constant(d1, d2, cstar)
    c21 = product_fi_constant(d2, d1, cstar)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = (x > 0.0) & (x <= 1.0)
    neg = (x < 0.0) & (x >= -1.0)
    xp = x[pos]
    out[pos] = c12 * xp ** (d1 - 1.0) * (1.0 - xp) ** (1.0 - 2.0 * d1) * specfun.g_factor(-xp, d2)
    xn = x[neg]
    out[neg] = c21 * (-xn) ** (d2 - 1.0) * (1.0 + xn) ** (1.0 - 2.0 * d2) * specfun.g_factor(xn, d1)
    return out


@dataclass(frozen=True)
class AsymptoticCheck:
    """Fitted and predicted power laws of the closed product density."""

    exp0p: float
    exp0m: float
    exp1: float
    expm1: float
    prefactors: dict
    expected_exponents: dict
    expected_prefactors: dict
    passed: bool

    def exponent_errors(self) -> dict:
        got = {"0+": self.exp0p, "0-": self.exp0m, "1-": self.exp1, "-1+": self.expm1}
        return {k: abs(got[k] - self.expected_exponents[k]) for k in got}

    def prefactor_errors(self) -> dict:
        return {k: abs(self.prefactors[k] / self.expected_prefactors[k] - 1.0) for k in self.prefactors}


ASYMPTOTIC_K = tuple(range(20, 41))


def verify_product_asymptotics(
    d1: float,
    d2: float,
    *,
    exponent_tol: float = 0.02,
    prefactor_tol: float = 0.02,
    k_range=ASYMPTOTIC_K,
    window: int = 6,
) -> AsymptoticCheck:
    """Fit the closed product density near ``0+``, ``0-``, ``1-`` and ``-1+``.

    Distances ``2^-k`` for ``k`` in ``k_range``; exponents are log-log
    slopes over the ``window`` closest points (after an R^2 >= 0.99 check on
    all of them) and prefactors are ``phi / dist**e`` averaged over the
    same points with the predicted exponent ``e``.
    """
    d1 = _check_d(d1, "d1")
    d2 = _check_d(d2, "d2")
    cstar = compute_cstar(d1, d2)
    dist = np.array([2.0**-k for k in k_range])
    s1, s2 = math.sin(math.pi * d1), math.sin(math.pi * d2)
    expected_e = {"0+": d1 + d2 - 1.0, "0-": d1 + d2 - 1.0, "1-": 1.0 - 2.0 * d1, "-1+": 1.0 - 2.0 * d2}
    expected_c = {
        "0+": math.pi / (cstar * s2),
        "0-": math.pi / (cstar * s1),
        "1-": 2.0 ** (1.0 - 2.0 * d2) * math.pi / (cstar * s2),
        "-1+": 2.0 ** (1.0 - 2.0 * d1) * math.pi / (cstar * s1),
    }
    points = {"0+": dist, "0-": -dist, "1-": 1.0 - dist, "-1+": -1.0 + dist}
    fitted, pref = {}, {}
    for key, xs in points.items():
        vals = product_fi_density_raw(xs, d1, d2, cstar)
        loglog_fit(dist, vals, min_r2=0.99)
        fitted[key] = loglog_fit(dist, vals, min_r2=0.0, tail=window).exponent
        e = expected_e[key]
        pref[key] = float(np.exp(np.mean(np.log(vals[-window:]) - e * np.log(dist[-window:]))))
    ok = all(abs(fitted[k] - expected_e[k]) <= exponent_tol for k in fitted) and all(
        abs(pref[k] / expected_c[k] - 1.0) <= prefactor_tol for k in pref
    )
    return AsymptoticCheck(fitted["0+"], fitted["0-"], fitted["1-"], fitted["-1+"], pref,
                           expected_e, expected_c, ok)


def acvf_convolution(gamma1: np.ndarray, gamma2: np.ndarray, H: int) -> np.ndarray:
    """``(1/2pi) sum_{j in Z} gamma1(j + h) gamma2(j)`` for ``h = 0..H``.

    Both sequences are autocovariances (even in the lag) given for lags
    ``0..M``; the sum is truncated at the largest ``|j|`` both cover.
    """
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    n = min(g1.size - 1 - H, g2.size - 1)
    if n <= 0:
        raise InconclusiveError("not enough autocovariance terms for the convolution")
    j = np.arange(-n, n + 1)
    w = g2[np.abs(j)]
    return np.array([np.dot(g1[np.abs(j + h)], w) for h in range(H + 1)]) / (2.0 * math.pi)
