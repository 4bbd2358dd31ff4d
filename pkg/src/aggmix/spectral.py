"""Spectral densities and autocovariances of aggregated AR(1) processes.

Every spectral density is evaluated through ``s = |1 - e^{i lambda}| =
2 sin(lambda/2)`` and ``c = |1 + e^{i lambda}| = 2 cos(lambda/2)``.  Both are
available to full relative precision next to their zeros (``lambda = 0``
and ``lambda = pi``) when the frequency is given as an offset from that
point, which is how the tail diagnostics and the frequency quadrature call
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import linalg

from .errors import DivergenceError, DomainError
from .fitting import PowerLawFit, loglog_fit
from .mixture import MixtureDensity, NoiseSpec, check_admissibility, endpoint_exponents
from .quadrature import geometric_breaks, integrate_interval

TWO_PI = 2.0 * math.pi
SINGULAR = math.inf
BATCH = 64
TAIL_K = tuple(range(12, 41))
TAIL_WINDOW = 6
TAIL_MIN_R2 = 0.999


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Even spectral density on ``[-pi, pi]``.

    Attributes
    ----------
    kind : str
    params : dict
    fn : callable
        ``fn(s, c)`` with ``s = 2 sin(lambda/2)``, ``c = 2 cos(lambda/2)``.
    exponent_zero, exponent_pi : float
        ``f ~ const * |lambda|**exponent_zero`` at the origin (0 when
        bounded), and likewise in ``pi - |lambda|`` at pi.
    noise_variance : float
        Micro-noise variance behind a mixture-backed density (``nan`` when
        the density is given directly).
    """

    kind: str
    params: Mapping[str, object]
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    exponent_zero: float = 0.0
    exponent_pi: float = 0.0
    noise_variance: float = math.nan
    meta: Mapping[str, object] = field(default_factory=dict)

    def __call__(self, lam):
        arr = np.asarray(lam, dtype=float)
        a = np.abs(arr)
        if np.any(a > math.pi * (1.0 + 1e-15)):
            raise DomainError("frequencies must lie in [-pi, pi]")
        # c from the distance to pi, so that lambda = pi gives c = 0 exactly
        return self._at(2.0 * np.sin(0.5 * a), 2.0 * np.sin(0.5 * np.maximum(math.pi - a, 0.0)), arr)

    def near_zero(self, delta):
        """``f(delta)`` for small ``delta > 0``."""
        d = np.asarray(delta, dtype=float)
        return self._at(2.0 * np.sin(0.5 * d), 2.0 * np.cos(0.5 * d), d)

    def near_pi(self, delta):
        """``f(pi - delta)`` without forming ``pi - delta``."""
        d = np.asarray(delta, dtype=float)
        return self._at(2.0 * np.cos(0.5 * d), 2.0 * np.sin(0.5 * d), d)

    def _at(self, s, c, like):
        scalar = np.ndim(like) == 0
        s = np.atleast_1d(s).astype(float)
        c = np.atleast_1d(c).astype(float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = np.asarray(self.fn(s, c), dtype=float)
        v = np.where(np.isnan(v), SINGULAR, v)
        v = v.reshape(np.shape(like))
        return float(v) if scalar else v

    def __mul__(self, other: "SpectralDensity") -> "SpectralDensity":
        return product_spectral(self, other)

    def is_singular(self, lam) -> np.ndarray:
        return np.isinf(self(lam))


def product_spectral(f1: SpectralDensity, f2: SpectralDensity) -> SpectralDensity:
    """Pointwise product ``f1 * f2``."""

    def fn(s, c):
        return f1.fn(s, c) * f2.fn(s, c)

    return SpectralDensity(
        "product",
        {"factors": (f1.kind, f2.kind)},
        fn,
        f1.exponent_zero + f2.exponent_zero,
        f1.exponent_pi + f2.exponent_pi,
        meta={"factors": (f1, f2)},
    )


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _check_d(d, name="d") -> float:
    d = float(d)
    if not 0.0 < d < 0.5:
        raise DomainError(f"{name} must lie in (0, 1/2), got {d}")
    return d


def fi_spectral(d: float) -> SpectralDensity:
    """``(1/2pi) |1 - e^{i lambda}|^(-2d)``."""
    d = _check_d(d)
    return SpectralDensity("fi", {"d": d}, lambda s, c: s ** (-2.0 * d) / TWO_PI, -2.0 * d, 0.0)


def sfi_spectral(d: float) -> SpectralDensity:
    """``(1/2pi) |1 + e^{i lambda}|^(-2d)``, singular at pi."""
    d = _check_d(d)
    return SpectralDensity("sfi", {"d": d}, lambda s, c: c ** (-2.0 * d) / TWO_PI, 0.0, -2.0 * d)


def uniform_closed_spectral(a: float, b: float, variance: float = 1.0) -> SpectralDensity:
    """Spectral density of the aggregate with a uniform ``[a, b]`` mixture.

    ``sigma^2 / (2 pi (b-a) sin(lambda)) * [arctan((b - cos l)/sin l) - arctan((a - cos l)/sin l)]``,
    with the arctangent difference folded into one ``atan2`` and the
    ``lambda -> 0, pi`` limits taken analytically.
    """
    a, b = float(a), float(b)
    if not -1.0 < a < b < 1.0:
        raise DomainError(f"uniform spectrum needs -1 < a < b < 1, got a={a}, b={b}")
    NoiseSpec(variance)

    def fn(s, c):
        sn = 0.5 * s * c
        cs = 0.25 * (c * c - s * s)
        den = sn * sn + (a - cs) * (b - cs)
        small = sn < 1e-8
        ratio = np.where(
            small,
            (b - a) / den,
            np.arctan2((b - a) * sn, den) / np.where(small, 1.0, sn),
        )
        return variance / (TWO_PI * (b - a)) * ratio

    return SpectralDensity("uniform", {"a": a, "b": b, "variance": variance}, fn, 0.0, 0.0,
                           float(variance))


def closed_spectral(kind: str, **params) -> SpectralDensity:
    """Closed-form spectral density by name.

    ``fi`` (d), ``sfi`` (d), ``productfi`` (d1, d2) and ``uniform``
    (a, b, variance).
    """
    kind = kind.lower()
    if kind == "fi":
        return fi_spectral(params["d"])
    if kind == "sfi":
        return sfi_spectral(params["d"])
    if kind == "productfi":
        f = fi_spectral(params["d1"]) * sfi_spectral(params["d2"])
        return SpectralDensity("productfi", {"d1": params["d1"], "d2": params["d2"]}, f.fn,
                               f.exponent_zero, f.exponent_pi)
    if kind == "uniform":
        return uniform_closed_spectral(params["a"], params["b"], params.get("variance", 1.0))
    raise DomainError(f"unknown closed spectral kind {kind!r}")


def tabulated_spectral(grid, values) -> SpectralDensity:
    """Even density from samples on ``[0, pi]``, linearly interpolated."""
    lam = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if lam.ndim != 1 or lam.shape != v.shape or np.any(np.diff(lam) <= 0):
        raise DomainError("grid must be strictly increasing and match values")
    if lam[0] < 0 or lam[-1] > math.pi or np.any(v < 0):
        raise DomainError("tabulated spectrum needs grid in [0, pi] and nonnegative values")

    def fn(s, c):
        return np.interp(np.arctan2(s, c) * 2.0, lam, v)

    return SpectralDensity("tabulated", {"n": lam.size}, fn)


# ---------------------------------------------------------------------------
# mixture-backed densities
# ---------------------------------------------------------------------------


def _singular_exponent(alpha: float) -> float:
    """Frequency exponent produced by a mixture endpoint ``(1 -+ x)^alpha``."""
    if not math.isfinite(alpha) or alpha >= 1.0:
        return 0.0
    return alpha - 1.0


def _mixture_fn(phi: MixtureDensity, variance: float, rtol: float):
    scale = variance / TWO_PI
    em, ep = endpoint_exponents(phi)
    div_zero = phi.touches_plus and ep <= 1.0
    div_pi = phi.touches_minus and em <= 1.0

    def fn(s, c):
        s = np.asarray(s, dtype=float)
        c = np.asarray(c, dtype=float)
        out = np.empty(s.shape)
        bad = (div_zero & (s == 0.0)) | (div_pi & (c == 0.0))
        out[bad] = SINGULAR
        idx = np.nonzero(~bad)[0]
        for start in range(0, idx.size, BATCH):
            sel = idx[start:start + BATCH]
            ss = s[sel][:, None]
            cc = c[sel][:, None]

            def kernel(x, omx, opx):
                pos = x >= 0.0
                den = np.where(pos, omx * omx + x * ss * ss, opx * opx - x * cc * cc)
                return 1.0 / den

            pos_s = s[sel][s[sel] > 0]
            pos_c = c[sel][c[sel] > 0]
            r = phi.integrate(
                kernel,
                rtol=rtol,
                plus_scale=float(pos_s.min()) if pos_s.size else None,
                minus_scale=float(pos_c.min()) if pos_c.size else None,
            )
            out[sel] = scale * np.atleast_1d(r.value)
        return out

    return fn


def mixture_spectral(phi: MixtureDensity, noise: NoiseSpec, *, rtol: float = 1e-9) -> SpectralDensity:
    """Spectral density ``(sigma^2/2pi) int phi(x) / |1 - x e^{i lambda}|^2 dx`` as an object."""
    adm = check_admissibility(phi)
    if not adm.admissible:
        raise DomainError("mixture density is not admissible")
    return SpectralDensity(
        "mixture",
        {"mixture": phi.kind, **dict(phi.params)},
        _mixture_fn(phi, noise.variance, rtol),
        _singular_exponent(adm.exponent_plus) if phi.touches_plus else 0.0,
        _singular_exponent(adm.exponent_minus) if phi.touches_minus else 0.0,
        noise.variance,
        {"mixture": phi},
    )


def spectral_from_mixture(phi: MixtureDensity, noise: NoiseSpec, lam, *, rtol: float = 1e-9):
    """Aggregate spectral density at frequency (or frequencies) ``lam``.

    The denominator ``|1 - x e^{i lambda}|^2`` is evaluated as
    ``(1-x)^2 + 4x sin^2(lambda/2)`` for ``x >= 0`` and as
    ``(1+x)^2 - 4x cos^2(lambda/2)`` for ``x < 0``; both are sums of
    nonnegative terms.  Raises :class:`DivergenceError` at a frequency where
    the integral diverges.
    """
    f = mixture_spectral(phi, noise, rtol=rtol)
    v = f(lam)
    if np.any(np.isinf(v)):
        raise DivergenceError("spectral density diverges at the requested frequency")
    return v


# ---------------------------------------------------------------------------
# autocovariances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcvfSequence:
    """Autocovariances ``gamma(0..H)``.

    ``long_memory`` is a diagnostic: the sequence is then not absolutely
    summable, which is fine for any finite horizon.
    """

    values: np.ndarray
    noise: NoiseSpec
    errors: np.ndarray | None = None
    long_memory: bool = False

    @property
    def lag_horizon(self) -> int:
        return self.values.size - 1

    def toeplitz_min_eigenvalue(self) -> float:
        return float(linalg.eigvalsh(linalg.toeplitz(self.values)).min())


def acvf_from_mixture(phi: MixtureDensity, noise: NoiseSpec, H: int, *, rtol: float = 1e-10) -> AcvfSequence:
    """``gamma(h) = sigma^2 int x^|h| phi(x) / (1 - x^2) dx`` for ``h = 0..H``."""
    H = int(H)
    if H < 0:
        raise DomainError("lag horizon must be nonnegative")
    adm = check_admissibility(phi)
    if not adm.admissible:
        raise DomainError("mixture density is not admissible: phi/(1-x^2) is not integrable")
    hs = np.arange(H + 1, dtype=float)[:, None]

    def kernel(x, omx, opx):
        return x[None, :] ** hs / (omx * opx)

    scale = 1.0 / max(H, 1)
    r = phi.integrate(kernel, rtol=rtol, plus_scale=scale, minus_scale=scale)
    vals = noise.variance * np.atleast_1d(r.value)
    return AcvfSequence(vals, noise, noise.variance * np.atleast_1d(r.error), adm.long_memory)


def fractional_noise_acvf(d: float, H: int) -> np.ndarray:
    """``Gamma(1-2d) Gamma(h+d) / (Gamma(d) Gamma(1-d) Gamma(h+1-d))`` for ``h = 0..H``."""
    from scipy.special import gammaln

    h = np.arange(H + 1, dtype=float)
    return np.exp(
        gammaln(1 - 2 * d) + gammaln(h + d) - gammaln(d) - gammaln(1 - d) - gammaln(h + 1 - d)
    )


# ---------------------------------------------------------------------------
# frequency-domain integrals and tails
# ---------------------------------------------------------------------------


def integrate_frequency(
    f: SpectralDensity,
    kernel: Callable[[np.ndarray], np.ndarray] | None = None,
    *,
    rtol: float = 1e-10,
):
    """``int_{-pi}^{pi} f(lambda) kernel(lambda) d lambda`` for even integrands.

    The power singularities of ``f`` at 0 and pi become Gauss-Jacobi
    weights; ``f`` is evaluated from the exact distances to both points.
    ``kernel`` may return a batch ``(..., n)``.
    """
    e0 = f.exponent_zero
    ep = f.exponent_pi

    def func(lam, d0, dp):
        s = 2.0 * np.sin(0.5 * d0)
        c = 2.0 * np.sin(0.5 * dp)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.asarray(f.fn(s, c), dtype=float)
        if e0:
            v = v / d0**e0
        if ep:
            v = v / dp**ep
        if kernel is not None:
            v = v * kernel(lam)
        return v

    r = integrate_interval(func, 0.0, math.pi, e0, ep, rtol=rtol,
                           left_breaks=geometric_breaks(1e-3, 0.5 * math.pi),
                           right_breaks=geometric_breaks(1e-3, 0.5 * math.pi))
    return 2.0 * np.asarray(r.value)


def acvf_from_spectrum(f: SpectralDensity, H: int, *, rtol: float = 1e-10) -> np.ndarray:
    """``gamma(h) = int f(lambda) cos(h lambda) d lambda``, ``h = 0..H``."""
    hs = np.arange(H + 1, dtype=float)[:, None]
    return np.atleast_1d(integrate_frequency(f, lambda lam: np.cos(hs * lam[None, :]), rtol=rtol))


@dataclass(frozen=True)
class TailFit:
    exponent: float
    constant: float
    r_squared: float
    reference_exponent: float


def tail_exponent(f: SpectralDensity, at: str | float = 0.0, *, k_range=TAIL_K,
                  window: int = TAIL_WINDOW, min_r2: float = TAIL_MIN_R2) -> TailFit:
    """Power law of ``f`` approaching 0 or pi on the grid ``delta = 2^-k``.

    The exponent is the log-log slope over the ``window`` points nearest the
    limit, after an R^2 check over the full grid.  The constant is the
    geometric mean of ``f / delta**e`` over the same points, where ``e`` is
    the density's own singular exponent when it carries one and the fitted
    slope otherwise (the fitted slope multiplied by ``log delta ~ -28`` would
    otherwise dominate the constant's error).
    """
    at_pi = str(at).lower() in ("pi", "3.141592653589793") or (
        not isinstance(at, str) and abs(float(at) - math.pi) < 1e-12)
    delta = np.array([2.0**-k for k in k_range])
    vals = f.near_pi(delta) if at_pi else f.near_zero(delta)
    fit = loglog_fit(delta, vals, min_r2=min_r2)
    local = loglog_fit(delta, vals, min_r2=0.0, tail=window)
    ref = f.exponent_pi if at_pi else f.exponent_zero
    e = ref if (ref != 0.0 or abs(local.exponent) < 0.05) and math.isfinite(ref) else local.exponent
    d_w, v_w = delta[-window:], vals[-window:]
    constant = float(np.exp(np.mean(np.log(v_w) - e * np.log(d_w))))
    return TailFit(local.exponent, constant, fit.r_squared, e)
