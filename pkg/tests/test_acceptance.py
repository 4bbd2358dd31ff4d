"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary and
printed immediately with ``-s``) before asserting.
"""

import math
import os
import time

import numpy as np
import pytest

from aggmix import specfun
from aggmix.disaggregate import fi_times_analytic, product_mixture_numeric, verify_product_asymptotics
from aggmix.mixture import NoiseSpec, fi_mixture, product_fi_mixture_closed, semiparametric_mixture, sfi_mixture, uniform_mixture
from aggmix.panel import PanelConfig, compare_to_theory, simulate_panel
from aggmix.spectral import (
    acvf_from_mixture,
    fractional_noise_acvf,
    mixture_spectral,
    spectral_from_mixture,
    tail_exponent,
)
from aggmix.wold import fi_ma_coeffs, ma_from_spectrum, product_ma_coeffs

from conftest import ACCEPTANCE

TWO_PI = 2 * math.pi


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_01_fi_quadrature_equivalence():
    start = time.perf_counter()
    lam = np.linspace(0.05, math.pi, 64)
    worst = 0.0
    for d in (0.1, 0.25, 0.4):
        phi, noise = fi_mixture(d)
        got = spectral_from_mixture(phi, noise, lam)
        expected = (2 * np.sin(lam / 2)) ** (-2 * d) / TWO_PI
        worst = max(worst, float(np.max(np.abs(got / expected - 1))))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-6 and elapsed < 10, f"max rel err {worst:.2e} (<= 1e-6), {elapsed:.2f} s (< 10 s)")


def test_02_fi_acvf_oracle():
    worst = 0.0
    for d in (0.1, 0.25, 0.4):
        got = acvf_from_mixture(*fi_mixture(d), 50).values
        worst = max(worst, float(np.max(np.abs(got / fractional_noise_acvf(d, 50) - 1))))
    record(2, worst <= 1e-6, f"max rel err {worst:.2e} over h <= 50 (<= 1e-6)")


def test_03_product_round_trip():
    lam = np.linspace(0.1, math.pi - 0.1, 64)
    parts = []
    ok = True
    cases = {
        "fi(0.2) x sfi(0.3)": lambda: product_mixture_numeric(*fi_mixture(0.2), *sfi_mixture(0.3)),
        "fi(0.3) x uniform[-0.6,-0.2]": lambda: fi_times_analytic(0.3, uniform_mixture(-0.6, -0.2), NoiseSpec(1.0)),
    }
    factors = {
        "fi(0.2) x sfi(0.3)": (fi_mixture(0.2), sfi_mixture(0.3)),
        "fi(0.3) x uniform[-0.6,-0.2]": (fi_mixture(0.3), (uniform_mixture(-0.6, -0.2), NoiseSpec(1.0))),
    }
    for name, build in cases.items():
        start = time.perf_counter()
        res = build()
        f = mixture_spectral(res.phi, res.noise)(lam)
        (p1, n1), (p2, n2) = factors[name]
        target = mixture_spectral(p1, n1)(lam) * mixture_spectral(p2, n2)(lam)
        err = float(np.max(np.abs(f / target - 1)))
        elapsed = time.perf_counter() - start
        ok &= err <= 1e-4 and elapsed < 60
        parts.append(f"{name}: {err:.2e}, {elapsed:.1f} s")
    record(3, ok, "; ".join(parts) + " (<= 1e-4, < 60 s)")


def test_04_closed_vs_numeric_product():
    x = np.concatenate([np.linspace(-0.9, -0.1, 161), np.linspace(0.1, 0.9, 161)])
    worst = 0.0
    for d1, d2 in ((0.2, 0.3), (0.25, 0.25), (0.4, 0.1)):
        closed, _ = product_fi_mixture_closed(d1, d2)
        numeric = product_mixture_numeric(*fi_mixture(d1), *sfi_mixture(d2)).phi
        worst = max(worst, float(np.max(np.abs(numeric.pdf(x) / closed.pdf(x) - 1))))
    record(4, worst <= 1e-5, f"max rel difference {worst:.2e} on |x| in [0.1, 0.9] (<= 1e-5)")


def test_05_product_asymptotics():
    e_worst = p_worst = 0.0
    for d1, d2 in ((0.2, 0.3), (0.25, 0.25), (0.4, 0.1)):
        chk = verify_product_asymptotics(d1, d2)
        e_worst = max(e_worst, max(chk.exponent_errors().values()))
        p_worst = max(p_worst, max(chk.prefactor_errors().values()))
    record(5, e_worst <= 0.02 and p_worst <= 0.02,
           f"max exponent err {e_worst:.2e} (<= 0.02), max prefactor rel err {p_worst:.2e} (<= 0.02)")


def test_06_spectral_tails():
    e_worst = p_worst = 0.0
    s2 = 1.0
    for d1, d2 in ((0.3, 0.2), (0.25, 0.25), (0.1, 0.4)):
        phi = semiparametric_mixture(d1, d2, lambda x: np.ones_like(x))
        f = mixture_spectral(phi, NoiseSpec(s2))
        t0, tp = tail_exponent(f, 0), tail_exponent(f, "pi")
        c0 = s2 * phi.meta["psi_plus"] / (2 ** (2 * d2 + 1) * math.sin(math.pi * d1))
        cp = s2 * phi.meta["psi_minus"] / (2 ** (2 * d1 + 1) * math.sin(math.pi * d2))
        e_worst = max(e_worst, abs(t0.exponent + 2 * d1), abs(tp.exponent + 2 * d2))
        p_worst = max(p_worst, abs(t0.constant / c0 - 1), abs(tp.constant / cp - 1))
    record(6, e_worst <= 0.02 and p_worst <= 0.02,
           f"max exponent err {e_worst:.2e} (<= 0.02), max prefactor rel err {p_worst:.2e} (<= 0.02)")


def test_07_wold_fi():
    from aggmix.spectral import fi_spectral

    c_worst = s_worst = 0.0
    for d in (0.1, 0.25, 0.4):
        m = ma_from_spectrum(fi_spectral(d))
        h = fi_ma_coeffs(d, 50)
        c_worst = max(c_worst, float(np.max(np.abs(m.coeffs[:51] - h) / h)))
        s_worst = max(s_worst, abs(m.innovation_variance - 1))
    record(7, c_worst <= 1e-4 and s_worst <= 1e-6,
           f"max rel err psi_j vs h_j {c_worst:.2e} (<= 1e-4), |sigma2 - 1| {s_worst:.2e} (<= 1e-6)")


def test_08_psi_asymptotics():
    from aggmix.spectral import uniform_closed_spectral

    d = 0.3
    mg = ma_from_spectrum(uniform_closed_spectral(-0.5, -0.1))
    m = product_ma_coeffs(d, mg.coeffs, mg.innovation_variance, 4096)
    j = 2048
    ratio = m.coeffs[j] * math.gamma(d) * j ** (1 - d) / mg.coeffs.sum()
    record(8, 0.99 <= ratio <= 1.01, f"ratio at j=2048 {ratio:.6f} (in [0.99, 1.01])")


def test_09_analyticity_dichotomy():
    g = acvf_from_mixture(uniform_mixture(-0.5, 0.5), NoiseSpec(1.0), 60).values
    # odd lags vanish by symmetry of the mixture; the envelope is fitted on even lags
    h = np.arange(0, 61, 2)
    slope_u = float(np.polyfit(h, np.log(np.abs(g[h])), 1)[0])
    gf = acvf_from_mixture(*fi_mixture(0.25), 500).values
    hh = np.arange(50, 501)
    slope_f = float(np.polyfit(np.log(hh), np.log(gf[hh]), 1)[0])
    ok = slope_u <= math.log(0.5) + 0.02 and abs(slope_f - (2 * 0.25 - 1)) <= 0.05
    record(9, ok, f"uniform log-slope {slope_u:.4f} (<= {math.log(0.5) + 0.02:.4f}); "
                  f"FI(0.25) log-log slope {slope_f:.4f} (-0.5 +- 0.05)")


@pytest.mark.slow
def test_10_monte_carlo_panel():
    cpus = os.cpu_count() or 1
    # the time budget is stated for an 8-core machine; scale it to the cores available
    budget = 300.0 * max(1.0, 8.0 / cpus)
    parts = []
    ok = True
    start = time.perf_counter()
    for name, (phi, noise) in {
        "fi(0.3)": fi_mixture(0.3),
        "uniform[-0.5,0.5]": (uniform_mixture(-0.5, 0.5), NoiseSpec(1.0)),
    }.items():
        cfg = PanelConfig(phi, noise, N=10_000, T=2**14, seed=20240601, replicates=20, lags=100, threads=cpus)
        rep = compare_to_theory(simulate_panel(cfg), phi, noise, 100)
        ok &= rep.fraction_within >= 0.99
        parts.append(f"{name}: {100 * rep.fraction_within:.1f}% of lags within 3 SE, max |z| {np.max(np.abs(rep.z)):.2f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < budget
    record(10, ok, "; ".join(parts) + f" (>= 99%); {elapsed:.0f} s on {cpus} core(s) (< {budget:.0f} s)")


def test_11_cd_identity():
    ds = np.linspace(0.005, 0.495, 99)
    worst = max(abs(specfun.fi_constant(d) / specfun.fi_constant_sine_form(d) - 1) for d in ds)
    record(11, worst <= 1e-12, f"max rel difference {worst:.2e} over 99 values of d (<= 1e-12)")
