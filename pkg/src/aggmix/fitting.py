"""Power-law fits used by the asymptotic diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconclusiveError

FLAT_LOG_RANGE = 1e-5


@dataclass(frozen=True)
class PowerLawFit:
    """``y ~ constant * x**exponent`` fitted on a geometric grid."""

    exponent: float
    constant: float
    r_squared: float


def loglog_fit(x, y, *, min_r2: float = 0.99, tail: int | None = None) -> PowerLawFit:
    """Least-squares line through ``(log x, log y)``.

    ``tail`` restricts the fit to the last ``tail`` points (the ones closest
    to the limit point when ``x`` is ordered toward it).  The constant is the
    geometric mean of ``y / x**exponent`` over the fitted points, which is
    far less sensitive to a small exponent error than the regression
    intercept at ``log x = 0``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(~np.isfinite(y)):
        raise InconclusiveError("power-law fit needs positive finite values")
    if tail is not None:
        x, y = x[-tail:], y[-tail:]
    if x.size < 3:
        raise InconclusiveError("power-law fit needs at least 3 points")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    if np.ptp(ly) < FLAT_LOG_RANGE:
        # flat to 1e-5 relative: R^2 is meaningless, the exponent is ~0
        r2 = 1.0
    else:
        r2 = 1.0 - np.sum(resid**2) / ss_tot
    if r2 < min_r2:
        raise InconclusiveError(f"power-law regression R^2={r2:.6f} below {min_r2}")
    constant = float(np.exp(np.mean(ly - slope * lx)))
    return PowerLawFit(float(slope), constant, float(r2))


def local_exponent_fit(x, y, *, min_r2: float = 0.99, window: int = 6) -> PowerLawFit:
    """Fit only the ``window`` points nearest the limit after an R^2 check on all points."""
    loglog_fit(x, y, min_r2=min_r2)
    return loglog_fit(x, y, min_r2=0.0, tail=window)
