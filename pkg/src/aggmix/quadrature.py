"""Adaptive Gauss-Jacobi / Gauss-Legendre quadrature for power-law endpoints.

The integrands in this package have integrable algebraic singularities at
support endpoints (``x**(d-1)``, ``(1-x)**(1-2d)``) and sharp Lorentzian
peaks whose width shrinks with the frequency.  The integrator here works on
one-sided problems

    integral_0^L g(s) s**alpha ds

where the first element ``[0, h]`` is integrated with a Gauss-Jacobi rule
for the weight ``s**alpha`` and every other element with Gauss-Legendre.
Elements are bisected greedily by their error estimate (difference of a
10- and a 20-point rule); bisecting the endpoint element grades the mesh
geometrically toward the singularity.

``g`` is called once per refinement round with all new nodes, and may
return a batch of integrands (shape ``(..., n_nodes)``).  The mesh is shared
by the whole batch and refined until every member meets its tolerance.
Distances from the endpoint are passed to ``g`` exactly, so callers never
have to form ``1 - x`` for ``x`` close to one.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import QuadratureError

N_LOW = 10
N_HIGH = 20
MAX_INTERVALS = 20_000
MAX_ROUNDS = 400


class QuadResult(NamedTuple):
    value: np.ndarray | float
    error: np.ndarray | float
    intervals: int


@lru_cache(maxsize=None)
def _legendre(n: int):
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _jacobi(n: int, alpha: float):
    # weight (1+x)^alpha on [-1, 1]; mapped to s in [0, 1] with weight s^alpha
    x, w = roots_jacobi(n, 0.0, alpha)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1.0)


def _rule(n: int, alpha: float, endpoint: bool):
    if endpoint and alpha != 0.0:
        return _jacobi(n, float(alpha))
    return _legendre(n)


def _evaluate(g, lo, hi, is_end, alpha):
    """Low/high order estimates on the given elements."""
    parts = []
    layout = []
    for n in (N_LOW, N_HIGH):
        for end in (True, False):
            sel = np.nonzero(is_end == end)[0]
            if sel.size == 0:
                continue
            t, w = _rule(n, alpha, end)
            h = hi[sel] - lo[sel]
            nodes = lo[sel, None] + h[:, None] * t[None, :]
            if end and alpha != 0.0:
                weights = w[None, :] * h[:, None] ** (alpha + 1.0)
            else:
                weights = w[None, :] * h[:, None]
                if alpha != 0.0:
                    weights = weights * nodes**alpha
            parts.append(nodes.ravel())
            layout.append((n, sel, weights))
    values = np.asarray(g(np.concatenate(parts)), dtype=float)
    batch = values.shape[:-1]
    low = np.zeros(batch + lo.shape)
    high = np.zeros(batch + lo.shape)
    start = 0
    for n, sel, weights in layout:
        size = weights.size
        block = values[..., start:start + size].reshape(batch + weights.shape)
        est = np.sum(block * weights, axis=-1)
        if n == N_LOW:
            low[..., sel] = est
        else:
            high[..., sel] = est
        start += size
    return high, np.abs(high - low)


def integrate_endpoint(
    g: Callable[[np.ndarray], np.ndarray],
    length: float,
    alpha: float = 0.0,
    *,
    breaks: Iterable[float] = (),
    rtol: float = 1e-10,
    atol: float = 0.0,
    max_intervals: int = MAX_INTERVALS,
) -> QuadResult:
    """Integrate ``g(s) * s**alpha`` over ``[0, length]``.

    ``alpha`` must exceed -1.  ``breaks`` are initial mesh points in
    ``(0, length)``; they only speed things up, correctness comes from the
    adaptive refinement.
    """
    if alpha <= -1.0:
        raise QuadratureError(f"endpoint exponent {alpha} is not integrable")
    if length <= 0.0:
        return QuadResult(0.0, 0.0, 0)
    pts = sorted({float(b) for b in breaks if 0.0 < b < length})
    edges = np.array([0.0] + pts + [float(length)])
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    is_end = np.zeros(lo.size, dtype=bool)
    is_end[0] = True
    est, err = _evaluate(g, lo, hi, is_end, alpha)

    for _ in range(MAX_ROUNDS):
        total = est.sum(axis=-1)
        scale = np.abs(est).sum(axis=-1)
        tol = np.maximum(atol, rtol * scale)
        tol = np.where(tol > 0.0, tol, np.finfo(float).tiny)
        tot_err = err.sum(axis=-1)
        if np.all(tot_err <= tol):
            return QuadResult(_squeeze(total), _squeeze(tot_err), lo.size)
        score = np.max(err / tol[..., None], axis=tuple(range(err.ndim - 1)))
        bad = score > 0.5 / lo.size
        if lo.size + bad.sum() > max_intervals:
            break
        idx = np.nonzero(bad)[0]
        mid = 0.5 * (lo[idx] + hi[idx])
        keep = ~bad
        new_lo = np.concatenate([lo[idx], mid])
        new_hi = np.concatenate([mid, hi[idx]])
        new_end = np.concatenate([is_end[idx], np.zeros(idx.size, dtype=bool)])
        n_est, n_err = _evaluate(g, new_lo, new_hi, new_end, alpha)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        is_end = np.concatenate([is_end[keep], new_end])
        est = np.concatenate([est[..., keep], n_est], axis=-1)
        err = np.concatenate([err[..., keep], n_err], axis=-1)

    total = est.sum(axis=-1)
    raise QuadratureError(
        f"tolerance not met after {lo.size} intervals: "
        f"max error {np.max(err.sum(axis=-1)):.3e} vs requested rtol={rtol}, atol={atol} "
        f"(estimate {np.max(np.abs(total)):.6e})"
    )


def _squeeze(a: np.ndarray):
    return float(a) if np.ndim(a) == 0 else a


def integrate_interval(
    func: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    a: float,
    b: float,
    alpha: float = 0.0,
    beta: float = 0.0,
    *,
    left_breaks: Iterable[float] = (),
    right_breaks: Iterable[float] = (),
    rtol: float = 1e-10,
    atol: float = 0.0,
) -> QuadResult:
    """Integrate ``func(x, x - a, b - x) * (x-a)**alpha * (b-x)**beta`` over ``[a, b]``.

    The interval is split at its midpoint and each half is integrated in the
    distance from its own endpoint.  ``left_breaks``/``right_breaks`` are
    distances from ``a``/``b`` at which the integrand has structure.
    """
    length = float(b) - float(a)
    if length <= 0.0:
        return QuadResult(0.0, 0.0, 0)
    half = 0.5 * length

    def left(s):
        return func(a + s, s, length - s) * (length - s) ** beta

    def right(t):
        return func(b - t, length - t, t) * (length - t) ** alpha

    r1 = integrate_endpoint(left, half, alpha, breaks=left_breaks, rtol=rtol, atol=0.5 * atol)
    r2 = integrate_endpoint(right, half, beta, breaks=right_breaks, rtol=rtol, atol=0.5 * atol)
    return QuadResult(
        _squeeze(np.asarray(r1.value) + np.asarray(r2.value)),
        _squeeze(np.asarray(r1.error) + np.asarray(r2.error)),
        r1.intervals + r2.intervals,
    )


def geometric_breaks(scale: float, length: float, factor: float = 2.0, below: int = 3) -> list[float]:
    """Mesh points ``scale * factor**k`` (k >= -below) that fall inside ``(0, length)``."""
    if not np.isfinite(scale) or scale <= 0.0:
        return []
    out = []
    p = scale * factor ** (-below)
    while p < length:
        out.append(p)
        p *= factor
    return out
