"""Monte-Carlo panels of random-coefficient AR(1) series.

Micro-series ``j`` of replicate ``r`` draws everything (its coefficient,
its stationary initial value and its noise) from its own generator seeded by
``SeedSequence(seed, spawn_key=(r, j))``.  Output therefore does not depend
on the order in which series or replicates are simulated, nor on the number
of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats

from .errors import DomainError
from .mixture import MixtureDensity, NoiseSpec, check_admissibility, sample_coefficients
from .spectral import acvf_from_mixture, mixture_spectral

RNG_SCHEME = "SFC64 per series, SeedSequence(seed, spawn_key=(replicate, series))"
GPH_POWER = 0.6


@dataclass(frozen=True, eq=False)
class PanelConfig:
    """Panel of ``N`` series of length ``T`` with coefficients drawn from ``phi``."""

    phi: MixtureDensity
    noise: NoiseSpec
    N: int
    T: int
    seed: int
    replicates: int = 1
    burn_in: int = 0
    lags: int = 100
    threads: int | None = None

    def __post_init__(self):
        if self.N < 1 or self.T < 2 or self.burn_in < 0 or self.replicates < 1:
            raise DomainError("need N >= 1, T >= 2, burn_in >= 0 and replicates >= 1")
        if not 0 <= self.lags < self.T:
            raise DomainError("lags must lie in [0, T)")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if not check_admissibility(self.phi).admissible:
            raise DomainError("mixture density is not admissible")

    def to_dict(self) -> dict:
        return {
            "mixture": self.phi.kind,
            "mixture_params": dict(self.phi.params),
            "noise_variance": self.noise.variance,
            "N": self.N,
            "T": self.T,
            "seed": int(self.seed),
            "replicates": self.replicates,
            "burn_in": self.burn_in,
            "lags": self.lags,
            "rng": RNG_SCHEME,
        }


@dataclass(frozen=True, eq=False)
class PanelResult:
    """Aggregates ``X^(N)`` per replicate and their second-order statistics.

    Attributes
    ----------
    aggregate : ndarray, shape (R, T)
    coefficients : ndarray, shape (R, N)
    sample_acvf : ndarray, shape (R, H + 1)
        ``(1/T) sum_t X_t X_{t+h}`` (the mean is known to be zero).
    periodogram : ndarray, shape (R, T // 2)
        ``|sum_t X_t e^{-i l t}|^2 / (2 pi T)`` at ``l_k = 2 pi k / T``, ``k >= 1``.
    """

    config: PanelConfig
    aggregate: np.ndarray
    coefficients: np.ndarray
    sample_acvf: np.ndarray
    periodogram: np.ndarray
    frequencies: np.ndarray

    @property
    def mean_acvf(self) -> np.ndarray:
        return self.sample_acvf.mean(axis=0)

    @property
    def mc_stderr(self) -> np.ndarray:
        """Standard error of :attr:`mean_acvf` across replicates (nan for one replicate)."""
        R = self.sample_acvf.shape[0]
        if R < 2:
            return np.full(self.sample_acvf.shape[1], np.nan)
        return self.sample_acvf.std(axis=0, ddof=1) / math.sqrt(R)


def series_rng(seed: int, replicate: int, series: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=(replicate, series))))


def simulate_series(phi: MixtureDensity, noise: NoiseSpec, T: int, burn_in: int,
                    rng: np.random.Generator) -> tuple[float, np.ndarray]:
    """One stationary AR(1) path ``y_1..y_T`` and its coefficient."""
    a = float(sample_coefficients(phi, rng, 1)[0])
    sd = math.sqrt(noise.variance)
    y0 = rng.standard_normal() * sd / math.sqrt(1.0 - a * a)
    eps = rng.standard_normal(T + burn_in) * sd
    y, _ = signal.lfilter([1.0], [1.0, -a], eps, zi=[a * y0])
    return a, y[burn_in:]


def sample_acvf(x: np.ndarray, H: int) -> np.ndarray:
    """``(1/T) sum_{t} x_t x_{t+h}`` for ``h = 0..H`` by FFT (no demeaning)."""
    T = x.shape[-1]
    n = 1 << int(math.ceil(math.log2(2 * T)))
    fx = np.fft.rfft(x, n)
    acf = np.fft.irfft(fx * np.conj(fx), n)[..., : H + 1]
    return acf / T


def periodogram(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Periodogram at the Fourier frequencies ``2 pi k / T``, ``k = 1..T//2``."""
    T = x.shape[-1]
    fx = np.fft.rfft(x)
    k = np.arange(1, T // 2 + 1)
    return 2.0 * math.pi * k / T, np.abs(fx[..., k]) ** 2 / (2.0 * math.pi * T)


def _replicate(cfg: PanelConfig, r: int):
    total = np.zeros(cfg.T)
    coeffs = np.empty(cfg.N)
    for j in range(cfg.N):
        a, y = simulate_series(cfg.phi, cfg.noise, cfg.T, cfg.burn_in, series_rng(cfg.seed, r, j))
        coeffs[j] = a
        total += y
    return total / math.sqrt(cfg.N), coeffs


def _threads(cfg: PanelConfig) -> int:
    if cfg.threads:
        return max(1, int(cfg.threads))
    env = os.environ.get("AGG_THREADS")
    return max(1, int(env)) if env else 1


def simulate_panel(cfg: PanelConfig) -> PanelResult:
    """Simulate ``cfg.replicates`` aggregates ``X_t = N^(-1/2) sum_j Y_t^(j)``.

    Every micro-series starts from its stationary law given its coefficient
    (``y_0 ~ N(0, sigma^2 / (1 - a^2))``), so no burn-in is needed.
    """
    # envelopes are cached on first use; build them before any threads start
    sample_coefficients(cfg.phi, np.random.default_rng(0), 1)
    with ThreadPoolExecutor(max_workers=_threads(cfg)) as ex:
        out = list(ex.map(lambda r: _replicate(cfg, r), range(cfg.replicates)))
    agg = np.stack([o[0] for o in out])
    coeffs = np.stack([o[1] for o in out])
    freqs, per = periodogram(agg)
    return PanelResult(cfg, agg, coeffs, sample_acvf(agg, cfg.lags), per, freqs)


# ---------------------------------------------------------------------------
# comparison with theory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelReport:
    """Per-lag z-scores and spectral/marginal diagnostics."""

    theory: np.ndarray
    z: np.ndarray
    replicate_z: np.ndarray
    flagged_lags: np.ndarray
    fraction_within: float
    replicate_fraction_outside: float
    log_periodogram_slope: float
    slope_stderr: float
    expected_slope: float
    normality_pvalue: float
    extra: dict = field(default_factory=dict)


def log_periodogram_slope(freqs: np.ndarray, per: np.ndarray, T: int) -> tuple[float, float]:
    """Slope of ``log I`` on ``log(2 sin(l/2))`` over the lowest ``floor(T^0.6)`` frequencies.

    Returns the mean slope over replicates and its standard error.
    """
    m = max(3, int(math.floor(T**GPH_POWER)))
    x = np.log(2.0 * np.sin(0.5 * freqs[:m]))
    per = np.atleast_2d(per)
    slopes = np.array([np.polyfit(x, np.log(p[:m]), 1)[0] for p in per])
    se = slopes.std(ddof=1) / math.sqrt(slopes.size) if slopes.size > 1 else math.pi / math.sqrt(24 * m)
    return float(slopes.mean()), float(se)


def compare_to_theory(result: PanelResult, phi: MixtureDensity, noise: NoiseSpec,
                      H: int | None = None, *, z_limit: float = 3.0) -> PanelReport:
    """Compare a panel with the theoretical autocovariances and spectrum.

    ``E gamma_hat(h) = (1 - h/T) gamma(h)`` for the known-mean estimator, so
    that is the target.  ``z`` uses the standard error of the replicate mean;
    ``replicate_z`` scores each replicate against the across-replicate
    standard deviation.
    """
    cfg = result.config
    H = cfg.lags if H is None else min(H, cfg.lags)
    T = cfg.T
    gamma = acvf_from_mixture(phi, noise, H).values
    theory = (1.0 - np.arange(H + 1) / T) * gamma
    est = result.sample_acvf[:, : H + 1]
    R = est.shape[0]
    if R > 1:
        sd = est.std(axis=0, ddof=1)
        z = (est.mean(axis=0) - theory) / (sd / math.sqrt(R))
        rz = (est - theory) / sd
    else:
        z = np.full(H + 1, np.nan)
        rz = np.full((1, H + 1), np.nan)
    within = float(np.mean(np.abs(z) <= z_limit)) if R > 1 else math.nan
    flagged = np.nonzero(np.abs(z) > z_limit)[0]
    rep_out = float(np.mean(np.abs(rz) > z_limit)) if R > 1 else math.nan

    slope, se = log_periodogram_slope(result.frequencies, result.periodogram, T)
    f = mixture_spectral(phi, noise)
    expected = f.exponent_zero
    pval = float(stats.shapiro(result.aggregate[:, T // 2]).pvalue) if R >= 3 else math.nan
    return PanelReport(theory, z, rz, flagged, within, rep_out, slope, se, expected, pval)
