"""Special functions used by the closed-form mixture densities.

Only real arguments are supported.  The Gauss hypergeometric function is
evaluated with a small pipeline of transformations that keeps every series
argument inside ``|z| <= 0.7`` (or ``|1 - z| <= 0.3``):

========================  =============================================
argument                  method
========================  =============================================
``-0.7 <= z <= 0.7``      defining power series
``0.7 < z < 1``           connection formula in ``1 - z``
``z = 1``                 Gauss summation
``-1 <= z < -0.7``        Pfaff transformation, ``z/(z-1)`` in (0.41, 0.5]
``z < -1``                reciprocal identity ``(1-z)^-b F(b, c-a; c; z/(z-1))``
``z > 1``                 principal value only (:func:`hyp2f1_pv`)
========================  =============================================
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

SERIES_RADIUS = 0.7
MAX_TERMS = 10_000
SERIES_EPS = 1e-16


def _as_output(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


_ZETA_K = np.arange(2, 60)
_ZETA_COEF = (-1.0) ** _ZETA_K * special.zeta(_ZETA_K.astype(float)) / _ZETA_K


def _log_gamma_one_plus(eps: np.ndarray) -> np.ndarray:
    """``ln Gamma(1 + eps)`` for ``|eps| <= 1/2`` from the zeta series.

    Keeps full relative accuracy next to the zero at ``eps = 0``.
    """
    powers = eps[..., None] ** _ZETA_K
    return -np.euler_gamma * eps + np.sum(powers * _ZETA_COEF, axis=-1)


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0``.

    Accepts scalars or arrays.  Raises :class:`DomainError` for ``x <= 0``.
    Around the zeros at 1 and 2 a series in ``x - 1`` (or ``x - 2``) is
    used so the relative error stays at rounding level there too.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    out = np.atleast_1d(special.gammaln(arr)).astype(float)
    flat = np.atleast_1d(arr)
    near1 = np.abs(flat - 1.0) <= 0.25
    if near1.any():
        out[near1] = _log_gamma_one_plus(flat[near1] - 1.0)
    near2 = np.abs(flat - 2.0) <= 0.25
    if near2.any():
        e = flat[near2] - 2.0
        out[near2] = _log_gamma_one_plus(e) + np.log1p(e)
    return _as_output(out.reshape(arr.shape), arr.ndim == 0)


def gamma(x):
    """Gamma function on the real line (poles raise :class:`DomainError`)."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr <= 0) & (arr == np.round(arr))):
        raise DomainError(f"gamma has a pole at {x!r}")
    return _as_output(special.gamma(arr), arr.ndim == 0)


def beta(a: float, b: float) -> float:
    """Euler beta function ``B(a, b)`` for positive arguments."""
    return math.exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b))


def fi_constant(d: float) -> float:
    """Normalizing constant ``Gamma(3-d) / (2 Gamma(d) Gamma(2-2d))``."""
    return 0.5 * math.exp(log_gamma(3.0 - d) - log_gamma(d) - log_gamma(2.0 - 2.0 * d))


def fi_constant_sine_form(d: float) -> float:
    """The same constant written as ``2^(2d-2) sin(pi d) Gamma(3-d) / (sqrt(pi) Gamma(3/2-d))``."""
    return (
        2.0 ** (2.0 * d - 2.0)
        * math.sin(math.pi * d)
        / math.sqrt(math.pi)
        * math.exp(log_gamma(3.0 - d) - log_gamma(1.5 - d))
    )


# ---------------------------------------------------------------------------
# Gauss hypergeometric function
# ---------------------------------------------------------------------------


def _series(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    term = np.ones_like(z)
    total = np.ones_like(z)
    for n in range(MAX_TERMS):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * z
        total = total + term
        if np.all(np.abs(term) <= SERIES_EPS * np.abs(total)):
            return total
    raise ConvergenceError(
        f"2F1 series did not converge in {MAX_TERMS} terms (a={a}, b={b}, c={c})"
    )


def _is_integer(v: float) -> bool:
    return abs(v - round(v)) < 1e-12


def _gauss_sum(a: float, b: float, c: float) -> float:
    s = c - a - b
    if s <= 0:
        raise DomainError(f"F({a},{b};{c};1) diverges: c-a-b={s} <= 0")
    return float(
        special.gamma(c) * special.gamma(s) * special.rgamma(c - a) * special.rgamma(c - b)
    )


def _connection(a: float, b: float, c: float, w: np.ndarray) -> np.ndarray:
    """F(a,b;c;1-w) for small w >= 0 via the 1-z connection formula."""
    s = c - a - b
    if _is_integer(s):
        raise ConvergenceError(f"connection formula degenerate for integer c-a-b={s}")
    gc = special.gamma(c)
    coef1 = gc * special.gamma(s) * special.rgamma(c - a) * special.rgamma(c - b)
    coef2 = gc * special.gamma(-s) * special.rgamma(a) * special.rgamma(b)
    out = coef1 * _series(a, b, 1.0 - s, w)
    if coef2 != 0.0:
        out = out + coef2 * np.power(w, s) * _series(c - a, c - b, 1.0 + s, w)
    return out


def _hyp2f1_real(a: float, b: float, c: float, z: np.ndarray, omz: np.ndarray) -> np.ndarray:
    """Dispatch on the argument; ``omz`` carries ``1 - z`` to full precision."""
    out = np.empty_like(z)
    if np.any(z > 1.0):
        raise DomainError("2F1 argument > 1 has a nonzero imaginary part; use hyp2f1_pv")

    m = np.abs(z) <= SERIES_RADIUS
    if m.any():
        out[m] = _series(a, b, c, z[m])

    m = (z > SERIES_RADIUS) & (omz > 0.0)
    if m.any():
        out[m] = _connection(a, b, c, omz[m])

    m = omz == 0.0
    if m.any():
        out[m] = _gauss_sum(a, b, c)

    # Pfaff: F(a,b;c;z) = (1-z)^-a F(a, c-b; c; z/(z-1))
    m = (z < -SERIES_RADIUS) & (z >= -1.0)
    if m.any():
        zz, oo = z[m], omz[m]
        out[m] = np.power(oo, -a) * _series(a, c - b, c, zz / (zz - 1.0))

    # reciprocal identity: F(a,b;c;z) = (1-z)^-b F(b, c-a; c; z/(z-1)), z/(z-1) in (1/2, 1)
    m = z < -1.0
    if m.any():
        oo = omz[m]
        w = -z[m] / oo
        out[m] = np.power(oo, -b) * _hyp2f1_real(b, c - a, c, w, 1.0 / oo)
    return out


def hyp2f1(a: float, b: float, c: float, x, *, one_minus_x=None):
    """Gauss hypergeometric function ``F(a, b; c; x)`` for real ``x <= 1``.

    Parameters
    ----------
    a, b, c : float
        Function parameters; ``c`` must not be a non-positive integer.
    x : float or array_like
        Argument(s).  Values above one raise :class:`DomainError`; the
        principal value there is available from :func:`hyp2f1_pv`.
    one_minus_x : float or array_like, optional
        ``1 - x`` supplied by the caller when ``x`` is close to one and the
        complement is known more accurately than ``1 - x`` can be formed.

    Returns
    -------
    float or ndarray
    """
    if c <= 0 and _is_integer(c):
        raise DomainError(f"c={c} is a non-positive integer")
    z = np.asarray(x, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).astype(float)
    omz = 1.0 - z if one_minus_x is None else np.atleast_1d(np.asarray(one_minus_x, float))
    omz = np.broadcast_to(omz, z.shape).astype(float)
    if np.any(~np.isfinite(z)):
        raise DomainError("2F1 argument must be finite")
    return _as_output(_hyp2f1_real(a, b, c, z, omz).reshape(np.shape(x)), scalar)


def hyp2f1_pv(a: float, b: float, c: float, x):
    """Principal value of ``F(a, b; c; x)`` for ``x > 1``.

    This is the real part of the analytic continuation (both sides of the
    branch cut have the same real part), equal to the Cauchy principal value
    of the Euler integral.  Requires ``a - b`` not an integer.
    """
    z = np.asarray(x, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).astype(float)
    if np.any(z <= 1.0):
        raise DomainError("hyp2f1_pv is defined for x > 1 only")
    if _is_integer(a - b):
        raise ConvergenceError("reciprocal-argument formula degenerate for integer a-b")
    w = 1.0 / z
    omw = (z - 1.0) / z
    gc = special.gamma(c)
    k1 = gc * special.gamma(b - a) * special.rgamma(b) * special.rgamma(c - a)
    k2 = gc * special.gamma(a - b) * special.rgamma(a) * special.rgamma(c - b)
    t1 = k1 * math.cos(math.pi * a) * np.power(z, -a) * _hyp2f1_real(a, 1 - c + a, 1 - b + a, w, omw)
    t2 = k2 * math.cos(math.pi * b) * np.power(z, -b) * _hyp2f1_real(b, 1 - c + b, 1 - a + b, w, omw)
    return _as_output((t1 + t2).reshape(np.shape(x)), scalar)


def _check_d(d: float) -> None:
    if not 0.0 < d < 0.5:
        raise DomainError(f"memory parameter d must lie in (0, 1/2), got {d}")


def g_factor(x, d: float):
    """``G(x; d) = F(1, d, 2-d; 1/x) - x F(1, d, 2-d; x)`` for ``x`` in [-1, 1] minus {0}.

    For ``x < 0`` the first term goes through the reciprocal identity and is
    real.  For ``0 < x <= 1`` the argument ``1/x`` lies on the branch cut and
    the principal value is used.
    """
    _check_d(d)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).astype(float)
    if np.any((arr == 0.0) | (np.abs(arr) > 1.0)):
        raise DomainError("g_factor needs x in [-1, 1] with x != 0")
    out = np.empty_like(arr)
    neg = arr < 0
    if neg.any():
        xn = arr[neg]
        out[neg] = _g_negative(-xn, d)
    pos = ~neg
    if pos.any():
        xp = arr[pos]
        first = np.empty_like(xp)
        at_one = xp == 1.0
        first[at_one] = _gauss_sum(1.0, d, 2.0 - d)
        if (~at_one).any():
            first[~at_one] = hyp2f1_pv(1.0, d, 2.0 - d, 1.0 / xp[~at_one])
        out[pos] = first - xp * hyp2f1(1.0, d, 2.0 - d, xp)
    return _as_output(out.reshape(np.shape(x)), scalar)


def _g_negative(u: np.ndarray, d: float) -> np.ndarray:
    """G(-u; d) for u in (0, 1]."""
    return np.power(u, d) * g_negative_scaled(u, d)


def g_negative_scaled(u, d: float):
    """``G(-u; d) / u**d`` for ``u`` in [0, 1], finite at ``u = 0``.

    Uses ``F(1, d, 2-d; -1/u) = (u/(1+u))^d F(d, 1-d, 2-d; 1/(1+u))`` so no
    power of ``u`` is ever divided out numerically.
    """
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).astype(float)
    w = 1.0 / (1.0 + arr)
    first = np.power(1.0 + arr, -d) * _hyp2f1_real(d, 1.0 - d, 2.0 - d, w, arr * w)
    second = np.power(arr, 1.0 - d) * _hyp2f1_real(1.0, d, 2.0 - d, -arr, 1.0 + arr)
    return _as_output((first + second).reshape(np.shape(u)), scalar)


def g_factor_origin_constant(d: float) -> float:
    """Limit of ``G(-u; d) / u**d`` as ``u -> 0+``: ``sqrt(pi) Gamma(2-d) / (2^(1-2d) Gamma(3/2-d))``."""
    return math.sqrt(math.pi) * math.exp(log_gamma(2.0 - d) - log_gamma(1.5 - d)) / 2.0 ** (1.0 - 2.0 * d)
