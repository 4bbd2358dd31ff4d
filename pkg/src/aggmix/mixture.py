"""Mixture densities of the random AR(1) coefficient.

A density is stored as a list of :class:`Piece` objects.  Each piece lives on
``[a, b]`` and is written as

    phi(x) = smooth(x) * (x - a)**alpha * (b - x)**beta

where ``smooth`` is bounded and the two power factors carry the algebraic
endpoint behaviour.  Quadrature, sampling and the admissibility check all
read ``alpha``/``beta`` from the pieces instead of rediscovering them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special

from . import specfun
from .errors import (
    DivergenceError,
    DomainError,
    InconclusiveError,
    RejectionBudgetError,
)
from .fitting import loglog_fit
from .io import read_csv, write_csv
from .quadrature import _jacobi, _legendre, geometric_breaks, integrate_interval

NORMALIZATION_RTOL = 1e-12
MIN_ACCEPTANCE = 1e-4
ENVELOPE_SAFETY = 1.02
# endpoint regression grid for tabulated densities: x_k = 1 - 2^-k
EXPONENT_GRID_K = tuple(range(8, 21))
LONG_MEMORY_TOL = 0.01

Smooth = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NoiseSpec:
    """Variance of the micro-level innovations."""

    variance: float = 1.0

    def __post_init__(self):
        v = float(self.variance)
        if not (math.isfinite(v) and v > 0.0):
            raise DomainError(f"noise variance must be positive and finite, got {self.variance}")
        object.__setattr__(self, "variance", v)


@dataclass(frozen=True, eq=False)
class Piece:
    """``smooth(x, x-a, b-x) * (x-a)**alpha * (b-x)**beta`` on ``[a, b]``."""

    a: float
    b: float
    alpha: float
    beta: float
    smooth: Smooth
    nodes: tuple = ()

    @property
    def length(self) -> float:
        return self.b - self.a

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        dl = x - self.a
        dr = self.b - x
        # endpoint singularities evaluate to inf on purpose
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self.smooth(x, dl, dr) * (dl**self.alpha * dr**self.beta)


@dataclass(frozen=True, eq=False)
class MixtureDensity:
    """Density of the AR(1) coefficient on a closed subinterval of ``[-1, 1]``.

    Attributes
    ----------
    kind : str
        ``"fi"``, ``"sfi"``, ``"productfi"``, ``"uniform"``,
        ``"semiparametric"``, ``"tabulated"`` or ``"product"``.
    params : dict
        Family parameters (``d``, ``d1``, ``d2``, ``a``, ``b`` ...).
    pieces : tuple of Piece
    endpoint_exponents : tuple of float
        ``(alpha_minus, alpha_plus)`` with ``phi ~ c (1 + x)**alpha_minus``
        near ``-1`` and ``phi ~ c (1 - x)**alpha_plus`` near ``+1``; ``inf``
        when the support stays away from that endpoint, ``nan`` when it has
        to be estimated from data.
    """

    kind: str
    params: Mapping[str, float]
    pieces: tuple
    endpoint_exponents: tuple = (math.inf, math.inf)
    meta: Mapping[str, object] = field(default_factory=dict)
    direct: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def support(self) -> tuple[float, float]:
        return (min(p.a for p in self.pieces), max(p.b for p in self.pieces))

    @property
    def a_star(self) -> float:
        """Largest ``|x|`` in the support."""
        lo, hi = self.support
        return max(abs(lo), abs(hi))

    @property
    def touches_plus(self) -> bool:
        return self.support[1] == 1.0

    @property
    def touches_minus(self) -> bool:
        return self.support[0] == -1.0

    def __call__(self, x):
        return self.pdf(x)

    def pdf(self, x):
        """Evaluate the density; zero outside the support, ``inf`` at integrable poles."""
        arr = np.asarray(x, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        out = np.zeros(arr.shape)
        done = np.zeros(arr.shape, dtype=bool)
        for p in self.pieces:
            m = (arr >= p.a) & (arr <= p.b) & ~done
            if m.any():
                if self.direct is not None:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        out[m] = self.direct(arr[m])
                else:
                    out[m] = p.evaluate(arr[m])
                done |= m
        return float(out[0]) if scalar else out

    def integrate(
        self,
        kernel: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None,
        *,
        rtol: float = 1e-10,
        atol: float = 0.0,
        plus_scale: float | None = None,
        minus_scale: float | None = None,
        zero_scale: float | None = None,
    ):
        """``integral phi(x) kernel(x, 1-x, 1+x) dx`` over the support.

        ``kernel`` receives ``1 - x`` and ``1 + x`` computed without
        cancellation next to the endpoints, and may return a batch of shape
        ``(..., n)``.  The ``*_scale`` hints place geometric mesh points at
        the given distance from ``+1``, ``-1`` or ``0``; they locate narrow
        features of the kernel (Lorentzian peaks) and only affect speed.

        Returns a :class:`~aggmix.quadrature.QuadResult`.
        """
        from .quadrature import QuadResult

        total = 0.0
        err = 0.0
        intervals = 0
        for p in self.pieces:
            half = 0.5 * p.length

            def func(x, dl, dr, p=p):
                v = p.smooth(x, dl, dr)
                if kernel is None:
                    return v
                omx = dr if p.b == 1.0 else 1.0 - x
                opx = dl if p.a == -1.0 else 1.0 + x
                return v * kernel(x, omx, opx)

            lb = [n - p.a for n in p.nodes]
            rb = [p.b - n for n in p.nodes]
            if p.b == 1.0 and plus_scale:
                rb += geometric_breaks(plus_scale, half)
            if p.a == -1.0 and minus_scale:
                lb += geometric_breaks(minus_scale, half)
            if zero_scale:
                if p.a == 0.0:
                    lb += geometric_breaks(zero_scale, half)
                if p.b == 0.0:
                    rb += geometric_breaks(zero_scale, half)
            r = integrate_interval(
                func, p.a, p.b, p.alpha, p.beta,
                left_breaks=lb, right_breaks=rb, rtol=rtol, atol=atol,
            )
            total = total + np.asarray(r.value)
            err = err + np.asarray(r.error)
            intervals += r.intervals
        val = float(total) if np.ndim(total) == 0 else total
        e = float(err) if np.ndim(err) == 0 else err
        return QuadResult(val, e, intervals)

    def total_mass(self) -> float:
        return float(self.integrate().value)

    def moment(self, k: int = 1) -> float:
        return float(self.integrate(lambda x, omx, opx: x**k).value)

    def cdf(self, x):
        """Distribution function, from a dense cumulative table."""
        xs, fs = self.cdf_table()
        return np.interp(x, xs, fs, left=0.0, right=1.0)

    def cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self.meta.get("_cdf_table") if isinstance(self.meta, dict) else None
        if cached is not None:
            return cached
        xs, fs = [], []
        base = 0.0
        for p in self.pieces:
            px, pf = _piece_cumulative(p)
            xs.append(px)
            fs.append(base + pf)
            base += pf[-1]
        x = np.concatenate(xs)
        f = np.concatenate(fs) / base
        x, idx = np.unique(x, return_index=True)
        f = np.maximum.accumulate(f[idx])
        table = (x, f)
        if isinstance(self.meta, dict):
            self.meta["_cdf_table"] = table
        return table


def _piece_cumulative(p: Piece, ratio: float = 2.0 ** (1.0 / 16.0), smallest: float = 1e-14):
    """Cumulative integral of one piece on a grid graded toward both ends."""
    half = 0.5 * p.length
    geo = [half]
    s = half
    while s > smallest * p.length:
        s /= ratio
        geo.append(s)
    geo = np.array(sorted(set(geo) | set(np.linspace(0, half, 257)[1:])))
    left_edges = np.concatenate([[0.0], geo])

    def half_integrals(exponent, other, from_left):
        lo, hi = left_edges[:-1], left_edges[1:]
        tj, wj = _jacobi(20, float(exponent)) if exponent != 0 else _legendre(20)
        tl, wl = _legendre(20)
        h = hi - lo
        out = np.empty(lo.size)
        # first element carries the endpoint power in the weights
        nodes0 = lo[0] + h[0] * tj
        w0 = wj * h[0] ** (exponent + 1.0) if exponent != 0 else wj * h[0]
        nodes = lo[1:, None] + h[1:, None] * tl[None, :]
        w = wl[None, :] * h[1:, None] * nodes**exponent
        allnodes = np.concatenate([nodes0, nodes.ravel()])
        if from_left:
            x = p.a + allnodes
            vals = p.smooth(x, allnodes, p.length - allnodes) * (p.length - allnodes) ** other
        else:
            x = p.b - allnodes
            vals = p.smooth(x, p.length - allnodes, allnodes) * (p.length - allnodes) ** other
        out[0] = np.sum(vals[:20] * w0)
        out[1:] = np.sum(vals[20:].reshape(nodes.shape) * w, axis=1)
        return out

    left = half_integrals(p.alpha, p.beta, True)
    right = half_integrals(p.beta, p.alpha, False)
    f_left = np.concatenate([[0.0], np.cumsum(left)])
    x_left = p.a + left_edges
    # the right half runs from the midpoint to b
    cum_right = np.cumsum(right[::-1])
    f_right = f_left[-1] + cum_right
    x_right = p.b - left_edges[::-1][1:]
    x_right[-1] = p.b
    return np.concatenate([x_left, x_right]), np.concatenate([f_left, f_right])


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _check_d(d: float, name: str = "d") -> float:
    d = float(d)
    if not 0.0 < d < 0.5:
        raise DomainError(f"{name} must lie in (0, 1/2), got {d}")
    return d


def fi_noise_variance(d: float) -> float:
    """Micro-noise variance ``sin(pi d) / (C(d) pi)`` that makes the aggregate FI(d)."""
    return math.sin(math.pi * d) / (specfun.fi_constant(d) * math.pi)


def fi_mixture(d: float) -> tuple[MixtureDensity, NoiseSpec]:
    """Mixture density ``C(d) x^(d-1) (1-x)^(1-2d) (1+x)`` on ``[0, 1]``.

    Together with the returned noise variance, the aggregate has spectral
    density ``(1/2pi) |1 - e^{i lambda}|^(-2d)``.
    """
    d = _check_d(d)
    c = specfun.fi_constant(d)

    def smooth(x, dl, dr):
        return c * (1.0 + x)

    piece = Piece(0.0, 1.0, d - 1.0, 1.0 - 2.0 * d, smooth)
    phi = MixtureDensity("fi", {"d": d}, (piece,), (math.inf, 1.0 - 2.0 * d), {"C": c})
    return phi, NoiseSpec(fi_noise_variance(d))


def sfi_mixture(d: float) -> tuple[MixtureDensity, NoiseSpec]:
    """Reflection of :func:`fi_mixture` onto ``[-1, 0]``: ``phi(x) = phi_fi(-x)``."""
    d = _check_d(d)
    c = specfun.fi_constant(d)

    def smooth(x, dl, dr):
        return c * (1.0 - x)

    piece = Piece(-1.0, 0.0, 1.0 - 2.0 * d, d - 1.0, smooth)
    phi = MixtureDensity("sfi", {"d": d}, (piece,), (1.0 - 2.0 * d, math.inf), {"C": c})
    return phi, NoiseSpec(fi_noise_variance(d))


def product_fi_constant(d1: float, d2: float, cstar: float) -> float:
    """``Gamma(d2) Gamma(2-2 d2) / (Gamma(2-d2) C*)``, the weight of the ``[0, 1]`` lobe."""
    return math.exp(
        specfun.log_gamma(d2) + specfun.log_gamma(2.0 - 2.0 * d2) - specfun.log_gamma(2.0 - d2)
    ) / cstar


def product_fi_mixture_closed(d1: float, d2: float) -> tuple[MixtureDensity, NoiseSpec]:
    """Closed-form mixture density of the product spectrum ``f(.; d1) f(.; d2)``.

    On ``[0, 1]`` the density is ``C(d1,d2) x^(d1-1) (1-x)^(1-2d1) G(-x; d2)``
    and on ``[-1, 0]`` it is ``C(d2,d1) |x|^(d2-1) (1+x)^(1-2d2) G(x; d1)``.
    The factor ``G(-u; d)`` vanishes like ``u^d`` at the origin, so the
    combined exponent there is ``d1 + d2 - 1``.
    """
    from .disaggregate import compute_cstar

    d1 = _check_d(d1, "d1")
    d2 = _check_d(d2, "d2")
    cstar = compute_cstar(d1, d2)
    c12 = product_fi_constant(d1, d2, cstar)
    c21 = product_fi_constant(d2, d1, cstar)

    def smooth_pos(x, dl, dr):
        return c12 * specfun.g_negative_scaled(dl, d2)

    def smooth_neg(x, dl, dr):
        return c21 * specfun.g_negative_scaled(dr, d1)

    e0 = d1 + d2 - 1.0
    pieces = (
        Piece(-1.0, 0.0, 1.0 - 2.0 * d2, e0, smooth_neg),
        Piece(0.0, 1.0, e0, 1.0 - 2.0 * d1, smooth_pos),
    )
    variance = math.sin(math.pi * d1) * math.sin(math.pi * d2) * cstar / (2.0 * math.pi**3)
    phi = MixtureDensity(
        "productfi",
        {"d1": d1, "d2": d2},
        pieces,
        (1.0 - 2.0 * d2, 1.0 - 2.0 * d1),
        {"cstar": cstar, "C12": c12, "C21": c21},
    )
    return phi, NoiseSpec(variance)


def uniform_mixture(a: float, b: float) -> MixtureDensity:
    """Uniform density on ``[a, b]`` with ``-1 < a < b < 1``."""
    a, b = float(a), float(b)
    if not -1.0 < a < b < 1.0:
        raise DomainError(f"uniform mixture needs -1 < a < b < 1, got a={a}, b={b}")
    height = 1.0 / (b - a)

    def smooth(x, dl, dr):
        return np.full(np.shape(x), height)

    return MixtureDensity("uniform", {"a": a, "b": b}, (Piece(a, b, 0.0, 0.0, smooth),))


def semiparametric_mixture(
    d1: float,
    d2: float,
    psi: Callable[[np.ndarray], np.ndarray],
    *,
    support: tuple[float, float] = (-1.0, 1.0),
    singular_points: Mapping[float, float] | None = None,
) -> MixtureDensity:
    """Density proportional to ``(1-x)^(1-2 d1) (1+x)^(1-2 d2) psi(x)``.

    Parameters
    ----------
    d1, d2 : float
        Memory parameters at frequency 0 and pi.
    psi : callable
        Nonnegative, vectorized.  It must be finite and nonzero at each
        support endpoint that equals ``+-1``.
    support : (float, float)
        Closed interval inside ``[-1, 1]`` outside of which ``psi`` is
        treated as zero.
    singular_points : dict, optional
        Interior points ``p`` where ``psi ~ |x - p|**e``, mapped to ``e``
        (``e > -1``).  The support is split there and the power is given to
        the quadrature weight, so ``psi`` may be unbounded at ``p``.

    The density is normalized by quadrature.  ``meta`` records
    ``psi(+1)``/``psi(-1)`` of the normalized density for tail predictions.
    """
    d1 = _check_d(d1, "d1")
    d2 = _check_d(d2, "d2")
    lo, hi = float(support[0]), float(support[1])
    if not -1.0 <= lo < hi <= 1.0:
        raise DomainError(f"support must satisfy -1 <= lo < hi <= 1, got {support}")
    sing = {float(k): float(v) for k, v in (singular_points or {}).items()}
    for p_, e in sing.items():
        if e <= -1.0:
            raise DivergenceError(f"singularity exponent {e} at {p_} is not integrable")

    psi_end = {}
    for end, touches in ((1.0, hi == 1.0), (-1.0, lo == -1.0)):
        if touches:
            v = float(np.asarray(psi(np.array([end])), dtype=float)[0])
            if not math.isfinite(v) or v <= 0.0:
                raise DomainError(f"psi({end:+g}) must be finite and positive, got {v}")
            psi_end[end] = v

    cuts = sorted({lo, hi} | {p_ for p_ in sing if lo < p_ < hi})
    e_plus = 1.0 - 2.0 * d1
    e_minus = 1.0 - 2.0 * d2

    def make_piece(a, b):
        alpha = e_minus if a == -1.0 else sing.get(a, 0.0)
        beta = e_plus if b == 1.0 else sing.get(b, 0.0)
        ea = 0.0 if a == -1.0 else sing.get(a, 0.0)
        eb = 0.0 if b == 1.0 else sing.get(b, 0.0)

        def raw(x, dl, dr):
            v = np.asarray(psi(x), dtype=float)
            omx = dr if b == 1.0 else 1.0 - x
            opx = dl if a == -1.0 else 1.0 + x
            if b != 1.0:
                v = v * omx**e_plus
            if a != -1.0:
                v = v * opx**e_minus
            if ea:
                v = v / dl**ea
            if eb:
                v = v / dr**eb
            return v

        return Piece(a, b, alpha, beta, raw)

    raw_pieces = tuple(make_piece(a, b) for a, b in zip(cuts[:-1], cuts[1:]))
    probe = MixtureDensity("semiparametric", {}, raw_pieces)
    try:
        z = probe.total_mass()
    except Exception as exc:  # quadrature failure means a non-integrable psi
        raise DivergenceError(f"normalization integral failed: {exc}") from exc
    if not (math.isfinite(z) and z > 0.0):
        raise DivergenceError(f"normalization integral is {z}")

    pieces = tuple(
        Piece(p.a, p.b, p.alpha, p.beta, (lambda x, dl, dr, s=p.smooth: s(x, dl, dr) / z))
        for p in raw_pieces
    )

    def direct(x):
        v = np.asarray(psi(x), dtype=float)
        return v * (1.0 - x) ** e_plus * (1.0 + x) ** e_minus / z

    _check_nonnegative(pieces)
    exps = (e_minus if lo == -1.0 else math.inf, e_plus if hi == 1.0 else math.inf)
    meta = {
        "normalization": z,
        "psi_plus": psi_end.get(1.0, 0.0) / z,
        "psi_minus": psi_end.get(-1.0, 0.0) / z,
        "singular_points": sing,
    }
    return MixtureDensity(
        "semiparametric", {"d1": d1, "d2": d2, "lo": lo, "hi": hi}, pieces, exps, meta, direct
    )


def _check_nonnegative(pieces: Sequence[Piece], n: int = 257) -> None:
    for p in pieces:
        u = (np.arange(n) + 0.5) / n
        x = p.a + p.length * u
        v = p.smooth(x, p.length * u, p.length * (1.0 - u))
        if np.any(v < 0.0) or np.any(~np.isfinite(v)):
            raise DomainError("density must be finite and nonnegative inside its support")


def tabulated_mixture(grid, values) -> MixtureDensity:
    """Piecewise-linear density through ``(grid, values)``, renormalized exactly.

    ``grid`` must be strictly increasing inside ``(-1, 1)`` and ``values``
    nonnegative.  The density is zero outside the grid.  Endpoint exponents
    are estimated lazily by :func:`check_admissibility`.
    """
    x = np.asarray(grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise DomainError("grid and values must be 1-d arrays of equal length >= 2")
    if np.any(np.diff(x) <= 0.0):
        raise DomainError("grid must be strictly increasing")
    if x[0] <= -1.0 or x[-1] >= 1.0:
        raise DomainError("grid must lie strictly inside (-1, 1)")
    if np.any(y < 0.0) or np.any(~np.isfinite(y)):
        raise DomainError("tabulated values must be finite and nonnegative")
    mass = float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))
    if mass <= 0.0:
        raise DomainError("tabulated density has zero mass")
    y = y / mass
    x.setflags(write=False)
    y.setflags(write=False)

    def smooth(t, dl, dr):
        return np.interp(t, x, y)

    piece = Piece(float(x[0]), float(x[-1]), 0.0, 0.0, smooth, tuple(x[1:-1]))
    return MixtureDensity(
        "tabulated", {"n": int(x.size)}, (piece,), (math.nan, math.nan),
        {"grid": x, "values": y},
    )


def load_tabulated(path) -> MixtureDensity:
    """Read a two-column ``x,phi`` CSV written by :func:`save_tabulated`."""
    header, data = read_csv(path)
    if len(header) != 2:
        raise DomainError(f"{path}: expected two columns (x, phi), got {header}")
    return tabulated_mixture(data[:, 0], data[:, 1])


def save_tabulated(phi: MixtureDensity, path, grid=None) -> Path:
    """Write ``phi`` on ``grid`` (default: its own nodes) as an ``x,phi`` CSV."""
    if grid is None:
        grid = phi.meta.get("grid")
        if grid is None:
            raise DomainError("a grid is required for non-tabulated densities")
    grid = np.asarray(grid, dtype=float)
    return write_csv(path, ["x", "phi"], [grid, phi.pdf(grid)])


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    long_memory: bool
    exponent_minus: float
    exponent_plus: float


def _estimate_endpoint_exponent(phi: MixtureDensity, end: float) -> float:
    grid = phi.meta["grid"]
    values = phi.meta["values"]
    dist = 1.0 - grid if end > 0 else 1.0 + grid
    reach = dist.min()
    if reach > 2.0 ** -EXPONENT_GRID_K[0]:
        return math.inf
    pts = np.array([2.0**-k for k in EXPONENT_GRID_K])
    pts = pts[pts >= reach]
    if pts.size < 3:
        # grid nodes themselves as a fallback inside the regression window
        pts = np.sort(dist[dist <= 2.0 ** -EXPONENT_GRID_K[0]])[::-1]
    xs = end * (1.0 - pts)
    vals = phi.pdf(xs)
    if np.all(vals == 0.0):
        return math.inf
    fit = loglog_fit(pts, vals, min_r2=0.99)
    return fit.exponent


def endpoint_exponents(phi: MixtureDensity) -> tuple[float, float]:
    """``(alpha_minus, alpha_plus)``; estimated by regression for tabulated densities."""
    em, ep = phi.endpoint_exponents
    if math.isnan(em):
        em = _estimate_endpoint_exponent(phi, -1.0)
    if math.isnan(ep):
        ep = _estimate_endpoint_exponent(phi, 1.0)
    return em, ep


def check_admissibility(phi: MixtureDensity) -> Admissibility:
    """Classify ``phi`` by its endpoint exponents.

    Admissible when both exponents are positive (``phi/(1-x^2)`` integrable);
    long memory when, in addition, the smaller one is below one
    (``phi/(1-x^2)^2`` not integrable).  Raises :class:`InconclusiveError`
    when an estimated exponent comes from a poor regression.
    """
    em, ep = endpoint_exponents(phi)
    lo = min(em, ep)
    estimated = any(math.isnan(e) for e in phi.endpoint_exponents)
    tol = LONG_MEMORY_TOL if estimated else 0.0
    admissible = lo > 0.0
    return Admissibility(admissible, bool(admissible and lo < 1.0 - tol), em, ep)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Envelope:
    piece: Piece
    bound: float
    mass: float
    acceptance: float


def _envelope(p: Piece) -> _Envelope:
    u = np.concatenate([
        np.linspace(0.0, 1.0, 4097)[1:-1],
        2.0 ** -np.arange(13.0, 53.0),
        1.0 - 2.0 ** -np.arange(13.0, 53.0),
    ])
    x = p.a + p.length * u
    s = p.smooth(x, p.length * u, p.length * (1.0 - u))
    bound = ENVELOPE_SAFETY * float(np.max(s))
    # mass of the piece and of the envelope bound * dl^alpha dr^beta
    mass = float(
        integrate_interval(lambda t, dl, dr: p.smooth(t, dl, dr), p.a, p.b, p.alpha, p.beta).value
    )
    env_mass = bound * p.length ** (p.alpha + p.beta + 1.0) * special.beta(p.alpha + 1.0, p.beta + 1.0)
    acc = mass / env_mass if env_mass > 0 else 0.0
    return _Envelope(p, bound, mass, acc)


def _envelopes(phi: MixtureDensity) -> list[_Envelope]:
    cached = phi.meta.get("_envelopes") if isinstance(phi.meta, dict) else None
    if cached is None:
        cached = [_envelope(p) for p in phi.pieces]
        for e in cached:
            if e.mass > 0.0 and e.acceptance < MIN_ACCEPTANCE:
                raise RejectionBudgetError(
                    f"rejection acceptance {e.acceptance:.2e} below {MIN_ACCEPTANCE:g}"
                )
        if isinstance(phi.meta, dict):
            phi.meta["_envelopes"] = cached
    return cached


def sample_coefficients(phi: MixtureDensity, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` coefficients from ``phi`` by rejection from Beta envelopes.

    On each piece the proposal is ``Beta(alpha + 1, beta + 1)`` rescaled to
    ``[a, b]``, which matches both endpoint powers exactly; a proposal is
    kept with probability ``smooth(x) / max(smooth)``.
    """
    envs = _envelopes(phi)
    masses = np.array([e.mass for e in envs])
    probs = masses / masses.sum()
    out = np.empty(size)
    which = rng.choice(len(envs), size=size, p=probs) if len(envs) > 1 else np.zeros(size, int)
    for k, env in enumerate(envs):
        idx = np.nonzero(which == k)[0]
        filled = 0
        p = env.piece
        budget = 0
        while filled < idx.size:
            need = idx.size - filled
            m = int(need / max(env.acceptance, MIN_ACCEPTANCE) * 1.1) + 8
            u = rng.beta(p.alpha + 1.0, p.beta + 1.0, size=m)
            x = p.a + p.length * u
            s = p.smooth(x, p.length * u, p.length * (1.0 - u))
            keep = rng.random(m) * env.bound < s
            got = x[keep][:need]
            out[idx[filled:filled + got.size]] = got
            filled += got.size
            budget += m
            if budget > 10 * idx.size / MIN_ACCEPTANCE + 1000:
                raise RejectionBudgetError("rejection sampler exceeded its proposal budget")
    return out


def sample_coefficient(phi: MixtureDensity, rng: np.random.Generator) -> float:
    """One draw from ``phi`` using the caller's generator."""
    return float(sample_coefficients(phi, rng, 1)[0])
