"""Wold (MA(infinity)) representation of aggregated processes.

The minimum-phase factor is computed by the cepstral method.  For a
density with power singularities ``f ~ |lambda|^e0`` at 0 and
``f ~ (pi - |lambda|)^epi`` at pi, the singular part

    e0 log|1 - e^{i lambda}| + epi log|1 + e^{i lambda}|

has the known Fourier coefficients ``-e0/(2|k|)`` and ``-epi (-1)^k/(2|k|)``
and zero mean, so it is removed before sampling and added back exactly.
Only the bounded remainder is sampled on the FFT grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import AliasingError, DomainError, NonIntegrableLogError
from .quadrature import geometric_breaks, integrate_interval
from .spectral import SpectralDensity

TWO_PI = 2.0 * math.pi
DEFAULT_J = 4096
DEFAULT_GRID = 2**16
ALIAS_RTOL = 1e-4
# |psi_j| below this fraction of psi_0 is compared absolutely in the doubling check
ALIAS_FLOOR = 1e-8


@dataclass(frozen=True)
class MaExpansion:
    """``X_t = sum_j psi_j Z_{t-j}`` with ``Var Z = innovation_variance``."""

    coeffs: np.ndarray
    innovation_variance: float
    grid: int = 0
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def truncation(self) -> int:
        return self.coeffs.size - 1

    def transfer(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        j = np.arange(self.coeffs.size)
        return np.exp(1j * np.outer(lam, j)) @ self.coeffs

    def reconstruct(self, lam) -> np.ndarray:
        """``(sigma^2 / 2pi) |sum_j psi_j e^{i j lambda}|^2``."""
        return self.innovation_variance / TWO_PI * np.abs(self.transfer(lam)) ** 2

    def acvf(self, H: int) -> np.ndarray:
        """``sigma^2 sum_j psi_j psi_{j+h}`` over the stored coefficients."""
        p = self.coeffs
        return np.array([self.innovation_variance * np.dot(p[: p.size - h], p[h:]) for h in range(H + 1)])

    def acvf_tail_bound(self) -> float:
        """Approximate bound on the ACVF truncation error, ``sigma^2 sum_{j > J} psi_j^2``.

        The tail is extrapolated from a power law ``|psi_j| ~ j^p`` fitted on
        ``[J/2, J]``; for monotone tails it bounds the error of every lag of
        :meth:`acvf`.  Infinite when the fitted tail is not square summable.
        """
        J = self.truncation
        if J < 8:
            return math.inf
        j = np.arange(J // 2, J + 1)
        a = np.abs(self.coeffs[J // 2:])
        if np.any(a == 0.0):
            return 0.0
        p = float(np.polyfit(np.log(j), np.log(a), 1)[0])
        if 2.0 * p + 1.0 >= 0.0:
            return math.inf
        return self.innovation_variance * a[-1] ** 2 * J / (-2.0 * p - 1.0)

    def tail_energy_fraction(self) -> float:
        """``sum_{j > J/2} psi_j^2 / sum_j psi_j^2``."""
        sq = self.coeffs**2
        return float(sq[self.coeffs.size // 2:].sum() / sq.sum())


def _check_d(d: float) -> float:
    d = float(d)
    if not 0.0 < d < 0.5:
        raise DomainError(f"d must lie in (0, 1/2), got {d}")
    return d


def fi_ma_coeffs(d: float, J: int) -> np.ndarray:
    """``h_j = Gamma(j+d) / (Gamma(j+1) Gamma(d))`` via ``h_j = h_{j-1} (j-1+d)/j``."""
    d = _check_d(d)
    if J < 0:
        raise DomainError("truncation must be nonnegative")
    j = np.arange(1, J + 1, dtype=float)
    return np.concatenate([[1.0], np.cumprod((j - 1.0 + d) / j)])


def _remainder(f: SpectralDensity):
    """``r(d0, dp) = log f - e0 log(2 sin(l/2)) - epi log(2 cos(l/2))`` from the distances to 0 and pi."""
    e0, ep = f.exponent_zero, f.exponent_pi

    def r(d0, dp):
        s = 2.0 * np.sin(0.5 * d0)
        c = 2.0 * np.sin(0.5 * dp)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.log(np.asarray(f.fn(s, c), dtype=float))
            if e0:
                v = v - e0 * np.log(s)
            if ep:
                v = v - ep * np.log(c)
        return v

    return r


def _limit(r, at_zero: bool) -> float:
    """Value of the remainder at an endpoint, from the closest representable offsets."""
    deltas = np.array([2.0**-40, 2.0**-44])
    vals = r(deltas, math.pi - deltas) if at_zero else r(math.pi - deltas, deltas)
    if not np.all(np.isfinite(vals)):
        raise NonIntegrableLogError("log spectral density is not finite next to an endpoint")
    return float(vals[-1])


def innovation_variance(f: SpectralDensity, *, rtol: float = 1e-12) -> float:
    """``2 pi exp((1/2pi) int log f)``.

    The logarithmic singularities integrate to zero over ``[0, pi]``
    (``int_0^pi log|1 -+ e^{i l}| dl = 0``), so only the bounded remainder
    is integrated, adaptively.
    """
    r = _remainder(f)

    def func(lam, d0, dp):
        v = r(d0, dp)
        if not np.all(np.isfinite(v)):
            raise NonIntegrableLogError("log f is not finite inside (0, pi)")
        return v

    res = integrate_interval(
        func, 0.0, math.pi, rtol=rtol, atol=1e-14,
        left_breaks=geometric_breaks(1e-6, 0.5 * math.pi),
        right_breaks=geometric_breaks(1e-6, 0.5 * math.pi),
    )
    return TWO_PI * math.exp(float(res.value) / math.pi)


def _sample_remainder(f: SpectralDensity, n: int) -> np.ndarray:
    """Remainder on ``lambda_k = 2 pi k / n`` for ``k = 0..n/2``."""
    r = _remainder(f)
    k = np.arange(n // 2 + 1)
    d0 = TWO_PI * k / n
    dp = TWO_PI * (n // 2 - k) / n
    out = np.empty(k.size)
    inner = slice(1, k.size - 1)
    out[inner] = r(d0[inner], dp[inner])
    out[0] = _limit(r, True)
    out[-1] = _limit(r, False)
    if not np.all(np.isfinite(out)):
        raise NonIntegrableLogError("log f is not finite on the frequency grid")
    return out


def _cepstrum(f: SpectralDensity, half: np.ndarray, n: int, J: int) -> np.ndarray:
    """Cepstral coefficients ``c_0..c_J`` of ``log f``."""
    full = np.concatenate([half, half[-2:0:-1]])
    c = np.fft.rfft(full).real / n
    c = c[: J + 1].copy()
    k = np.arange(1, J + 1, dtype=float)
    if f.exponent_zero:
        c[1:] += -f.exponent_zero / (2.0 * k)
    if f.exponent_pi:
        c[1:] += -f.exponent_pi * (-1.0) ** k / (2.0 * k)
    return c


def _exp_series(b: np.ndarray, J: int) -> np.ndarray:
    """Coefficients of ``exp(sum_{k>=1} b_k z^k)`` up to ``z^J``."""
    kb = np.arange(J + 1, dtype=float) * b[: J + 1]
    psi = np.zeros(J + 1)
    psi[0] = 1.0
    for n in range(1, J + 1):
        psi[n] = np.dot(kb[1:n + 1], psi[n - 1::-1]) / n
    return psi


def ma_from_spectrum(f: SpectralDensity, J: int = DEFAULT_J, grid: int = DEFAULT_GRID,
                     *, check: bool = True) -> MaExpansion:
    """Minimum-phase MA coefficients ``psi_0..psi_J`` and innovation variance.

    ``grid`` must be a power of two of at least ``8 J``.  With ``check`` the
    factorization is repeated on the doubled grid and
    :class:`AliasingError` is raised if any ``psi_j`` with ``j <= J/2``
    moves by more than ``1e-4`` relative (absolute below
    ``1e-8 * psi_0``).
    """
    J = int(J)
    grid = int(grid)
    if J < 1:
        raise DomainError("truncation must be at least 1")
    if grid & (grid - 1) or grid < 8 * J:
        raise DomainError(f"grid must be a power of two >= 8 J = {8 * J}, got {grid}")

    n_eval = 2 * grid if check else grid
    half_fine = _sample_remainder(f, n_eval)

    def factor(n, half):
        c = _cepstrum(f, half, n, J)
        return _exp_series(c, J), TWO_PI * math.exp(c[0])

    if check:
        psi_f, _ = factor(n_eval, half_fine)
        psi, s2 = factor(grid, half_fine[::2])
        m = J // 2 + 1
        scale = np.maximum(np.abs(psi[:m]), ALIAS_FLOOR)
        change = float(np.max(np.abs(psi_f[:m] - psi[:m]) / scale))
        if change > ALIAS_RTOL:
            raise AliasingError(
                f"doubling the grid changed psi_j by {change:.2e} relative (limit {ALIAS_RTOL:g}); "
                f"increase the grid"
            )
    else:
        psi, s2 = factor(grid, half_fine)
        change = math.nan
    return MaExpansion(psi, s2, grid, {"doubling_change": change})


def product_ma_coeffs(d: float, g_coeffs, sigma2_g: float, J: int) -> MaExpansion:
    """MA expansion of ``FI(d) * g`` from the MA expansion of ``g``.

    ``psi = h * g`` (convolution, so ``psi_0 = 1``) and the innovation
    variance is ``sigma_g^2 / (2 pi)``.
    """
    d = _check_d(d)
    g = np.asarray(g_coeffs, dtype=float)
    if g.size == 0 or abs(g[0] - 1.0) > 1e-12:
        raise DomainError("g coefficients must start with g_0 = 1")
    if not sigma2_g > 0:
        raise DomainError("sigma2_g must be positive")
    h = fi_ma_coeffs(d, J)
    gg = np.zeros(J + 1)
    gg[: min(J + 1, g.size)] = g[: J + 1]
    psi = np.convolve(h, gg)[: J + 1]
    return MaExpansion(psi, sigma2_g / TWO_PI, 0, {"d": d, "sum_g": float(g.sum())})


def exponential_decay_rate(coeffs, *, start: int = 1, floor: float = 1e-13) -> float:
    """Slope of ``log|c_j|`` against ``j`` (negative for exponential decay).

    Only terms above ``floor * max|c|`` enter the fit, so rounding noise in
    the far tail does not flatten the slope.
    """
    c = np.abs(np.asarray(coeffs, dtype=float))
    j = np.arange(c.size)
    m = (j >= start) & (c > floor * c.max())
    if m.sum() < 3:
        raise DomainError("too few significant coefficients to fit a decay rate")
    return float(np.polyfit(j[m], np.log(c[m]), 1)[0])
