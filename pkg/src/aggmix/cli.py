"""Command-line interface.

Every subcommand writes its data files and one ``manifest.json`` into
``--out``; nothing but diagnostics goes to stderr and nothing goes to stdout.
Exit codes: 0 success, 1 invalid input, 2 numerical tolerance not met.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AggmixError, ConvergenceError, DomainError, InconclusiveError
from .io import write_csv, write_json
from .mixture import (
    MixtureDensity,
    NoiseSpec,
    check_admissibility,
    fi_mixture,
    load_tabulated,
    product_fi_mixture_closed,
    sfi_mixture,
    uniform_mixture,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TOLERANCE = 2

SPEC_KEYS = {
    "fi": {"d"},
    "sfi": {"d"},
    "productfi": {"d1", "d2"},
    "uniform": {"a", "b", "s2"},
}


class UsageError(Exception):
    """Invalid command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# spec mini-language
# ---------------------------------------------------------------------------


def parse_spec(text: str) -> tuple[str, dict]:
    """Parse ``kind:key=val,...`` (or ``table:path``) into ``(kind, params)``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "table":
        if not rest:
            raise UsageError("table spec needs a path: table:path/to/file.csv")
        return kind, {"path": rest}
    if kind not in SPEC_KEYS:
        raise UsageError(f"unknown kind {kind!r}; expected one of fi, sfi, productfi, uniform, table")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"malformed parameter {item!r} in {text!r}; use key=value")
        key = key.strip()
        if key not in SPEC_KEYS[kind]:
            raise UsageError(f"{kind} accepts {sorted(SPEC_KEYS[kind])}, got {key!r}")
        try:
            params[key] = float(val)
        except ValueError:
            raise UsageError(f"parameter {key} must be a number, got {val!r}") from None
    missing = SPEC_KEYS[kind] - set(params) - {"s2"}
    if missing:
        raise UsageError(f"{kind} spec is missing {sorted(missing)}")
    return kind, params


def _range_check(kind: str, params: dict) -> None:
    for key in ("d", "d1", "d2"):
        if key in params and not 0.0 < params[key] < 0.5:
            raise UsageError(f"{key}={params[key]} out of range; valid range is 0 < {key} < 0.5")
    if kind == "uniform":
        a, b = params["a"], params["b"]
        if not -1.0 < a < b < 1.0:
            raise UsageError(f"uniform needs -1 < a < b < 1, got a={a}, b={b}")
        if params.get("s2", 1.0) <= 0:
            raise UsageError("s2 must be positive")


def build_mixture(text: str) -> tuple[MixtureDensity, NoiseSpec]:
    """Mixture density and noise variance for a spec string."""
    kind, params = parse_spec(text)
    if kind == "table":
        return load_tabulated(params["path"]), NoiseSpec(1.0)
    _range_check(kind, params)
    if kind == "fi":
        return fi_mixture(params["d"])
    if kind == "sfi":
        return sfi_mixture(params["d"])
    if kind == "productfi":
        return product_fi_mixture_closed(params["d1"], params["d2"])
    return uniform_mixture(params["a"], params["b"]), NoiseSpec(params.get("s2", 1.0))


def build_spectrum(texts: list[str]):
    """Closed-form spectral density, multiplied over repeated ``--spectrum`` specs."""
    from .spectral import closed_spectral, mixture_spectral

    out = None
    for text in texts:
        kind, params = parse_spec(text)
        if kind == "table":
            phi = load_tabulated(params["path"])
            f = mixture_spectral(phi, NoiseSpec(1.0))
        else:
            _range_check(kind, params)
            if kind == "uniform":
                params = {"a": params["a"], "b": params["b"], "variance": params.get("s2", 1.0)}
            f = closed_spectral(kind, **params)
        out = f if out is None else out * f
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_mixture(args, tol: dict) -> int:
    phi, noise = build_mixture(args.mixture)
    lo, hi = phi.support
    k = np.arange(args.grid)
    x = lo + (hi - lo) * 0.5 * (1.0 - np.cos(math.pi * (k + 0.5) / args.grid))
    out = _out_dir(args)
    write_csv(out / "mixture.csv", ["x", "phi"], [x, phi.pdf(x)])
    adm = check_admissibility(phi)
    tol.update({
        "normalization_error": abs(phi.total_mass() - 1.0),
        "noise_variance": noise.variance,
        "admissible": adm.admissible,
        "long_memory": adm.long_memory,
        "exponent_minus": adm.exponent_minus,
        "exponent_plus": adm.exponent_plus,
    })
    return EXIT_OK


def _frequency_grid(n: int) -> np.ndarray:
    return math.pi * np.arange(n) / (n - 1)


def cmd_spectrum(args, tol: dict) -> int:
    from .spectral import mixture_spectral

    if bool(args.mixture) == bool(args.spectrum):
        raise UsageError("give exactly one of --mixture or --spectrum")
    if args.mixture:
        phi, noise = build_mixture(args.mixture)
        f = mixture_spectral(phi, noise, rtol=args.rtol)
    else:
        f = build_spectrum(args.spectrum)
    lam = _frequency_grid(args.grid)
    write_csv(_out_dir(args) / "spectrum.csv", ["lambda", "f"], [lam, f(lam)])
    tol.update({"quadrature_rtol": args.rtol, "exponent_zero": f.exponent_zero,
                "exponent_pi": f.exponent_pi})
    return EXIT_OK


def cmd_acvf(args, tol: dict) -> int:
    from .spectral import acvf_from_mixture

    phi, noise = build_mixture(args.mixture)
    acvf = acvf_from_mixture(phi, noise, args.lags, rtol=args.rtol)
    h = np.arange(args.lags + 1)
    write_csv(_out_dir(args) / "acvf.csv", ["h", "gamma"], [h, acvf.values])
    tol.update({
        "quadrature_rtol": args.rtol,
        "max_error_estimate": float(np.max(np.abs(acvf.errors))),
        "long_memory": acvf.long_memory,
    })
    return EXIT_OK


def cmd_disaggregate(args, tol: dict) -> int:
    from .disaggregate import product_mixture_numeric

    phi1, n1 = build_mixture(args.f1)
    phi2, n2 = build_mixture(args.f2)
    res = product_mixture_numeric(phi1, n1, phi2, n2, n_nodes=args.nodes)
    out = _out_dir(args)
    write_csv(out / "mixture.csv", ["x", "phi"], [res.grid, res.phi.meta["values"]])
    tol.update({
        "c_star": res.c_star,
        "noise_variance": res.noise.variance,
        "normalization_error": abs(res.meta["mass"] - 1.0),
        "quadrature_rtol": res.meta["rtol"],
        "support": list(res.phi.support),
    })
    return EXIT_OK


def cmd_wold(args, tol: dict) -> int:
    from .spectral import mixture_spectral
    from .wold import innovation_variance, ma_from_spectrum

    if bool(args.mixture) == bool(args.spectrum):
        raise UsageError("give exactly one of --mixture or --spectrum")
    if args.mixture:
        phi, noise = build_mixture(args.mixture)
        f = mixture_spectral(phi, noise)
    else:
        f = build_spectrum(args.spectrum)
    ma = ma_from_spectrum(f, args.J, args.fft_grid)
    j = np.arange(ma.coeffs.size)
    write_csv(_out_dir(args) / "psi.csv", ["j", "psi"], [j, ma.coeffs])
    s2_quad = innovation_variance(f)
    tol.update({
        "sigma2": ma.innovation_variance,
        "sigma2_quadrature": s2_quad,
        "sigma2_relative_difference": abs(ma.innovation_variance / s2_quad - 1.0),
        "grid_doubling_change": ma.meta["doubling_change"],
        "acvf_tail_bound": ma.acvf_tail_bound(),
        "truncation": args.J,
        "grid": args.fft_grid,
    })
    return EXIT_OK


def cmd_simulate(args, tol: dict) -> int:
    from .panel import PanelConfig, compare_to_theory, simulate_panel

    phi, noise = build_mixture(args.mixture)
    cfg = PanelConfig(phi, noise, args.N, args.T, args.seed, args.replicates, args.burn_in,
                      args.lags, args.threads)
    res = simulate_panel(cfg)
    rep = compare_to_theory(res, phi, noise, args.lags)
    out = _out_dir(args)
    R = args.replicates
    t = np.arange(1, args.T + 1)
    write_csv(out / "aggregate.csv", ["t"] + [f"x{r}" for r in range(R)], [t, *res.aggregate])
    h = np.arange(args.lags + 1)
    write_csv(out / "acf.csv", ["h", "gamma_hat", "gamma_theory", "stderr", "z"],
              [h, res.mean_acvf, rep.theory, res.mc_stderr, rep.z])
    write_csv(out / "periodogram.csv", ["lambda"] + [f"I{r}" for r in range(R)],
              [res.frequencies, *res.periodogram])
    tol.update({
        "fraction_lags_within_3se": rep.fraction_within,
        "flagged_lags": rep.flagged_lags.tolist(),
        "log_periodogram_slope": rep.log_periodogram_slope,
        "slope_stderr": rep.slope_stderr,
        "expected_slope": rep.expected_slope,
        "normality_pvalue": rep.normality_pvalue,
        "rng": cfg.to_dict()["rng"],
    })
    return EXIT_OK


def _verify_asymptotics(args, tol):
    from .disaggregate import verify_product_asymptotics

    chk = verify_product_asymptotics(args.d1, args.d2)
    tol["asymptotics"] = {
        "exponent_errors": chk.exponent_errors(),
        "prefactor_errors": chk.prefactor_errors(),
        "passed": chk.passed,
    }
    return chk.passed


def _verify_cd(args, tol):
    from .specfun import fi_constant, fi_constant_sine_form

    ds = np.linspace(0.005, 0.495, 99)
    err = max(abs(fi_constant(d) / fi_constant_sine_form(d) - 1.0) for d in ds)
    tol["cd_identity_max_relative_error"] = err
    return err <= 1e-12


def _verify_fi(args, tol):
    from .spectral import fi_spectral, fractional_noise_acvf, spectral_from_mixture, acvf_from_mixture

    phi, noise = fi_mixture(args.d)
    lam = np.linspace(0.05, math.pi, 64)
    e1 = float(np.max(np.abs(spectral_from_mixture(phi, noise, lam) / fi_spectral(args.d)(lam) - 1.0)))
    e2 = float(np.max(np.abs(acvf_from_mixture(phi, noise, 50).values / fractional_noise_acvf(args.d, 50) - 1.0)))
    tol["fi_spectrum_max_relative_error"] = e1
    tol["fi_acvf_max_relative_error"] = e2
    return e1 <= 1e-6 and e2 <= 1e-6


def _verify_product(args, tol):
    from .disaggregate import product_mixture_numeric

    pc, _ = product_fi_mixture_closed(args.d1, args.d2)
    p1, n1 = fi_mixture(args.d1)
    p2, n2 = sfi_mixture(args.d2)
    res = product_mixture_numeric(p1, n1, p2, n2)
    x = np.concatenate([np.linspace(-0.9, -0.1, 81), np.linspace(0.1, 0.9, 81)])
    err = float(np.max(np.abs(res.phi.pdf(x) - pc.pdf(x))))
    tol["closed_vs_numeric_max_abs_difference"] = err
    return err <= 1e-5


def _verify_wold(args, tol):
    from .spectral import fi_spectral
    from .wold import fi_ma_coeffs, ma_from_spectrum

    ma = ma_from_spectrum(fi_spectral(args.d))
    err = float(np.max(np.abs(ma.coeffs[:51] - fi_ma_coeffs(args.d, 50))))
    tol["wold_fi_max_abs_error"] = err
    tol["wold_fi_sigma2_error"] = abs(ma.innovation_variance - 1.0)
    return err <= 1e-4 and abs(ma.innovation_variance - 1.0) <= 1e-6


SUITES = {
    "asymptotics": _verify_asymptotics,
    "cd": _verify_cd,
    "fi": _verify_fi,
    "product": _verify_product,
    "wold": _verify_wold,
}


def cmd_verify(args, tol: dict) -> int:
    for key in ("d", "d1", "d2"):
        v = getattr(args, key)
        if not 0.0 < v < 0.5:
            raise UsageError(f"--{key}={v} out of range; valid range is 0 < {key} < 0.5")
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = {name: bool(SUITES[name](args, tol)) for name in names}
    tol["suites"] = results
    for name, ok in results.items():
        if not ok:
            print(f"verify: suite {name} failed its tolerance", file=sys.stderr)
    return EXIT_OK if all(results.values()) else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aggmix", description="Aggregation of random-coefficient AR(1) processes.")
    p.add_argument("--version", action="version", version=f"aggmix {__version__}")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: AGG_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, out_required=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", required=out_required, help="output directory")
        return sp

    sp = add("mixture", "tabulate a mixture density")
    sp.add_argument("--mixture", required=True, help="kind:key=val,... (fi, sfi, productfi, uniform, table)")
    sp.add_argument("--grid", type=_positive_int, default=1024)

    sp = add("spectrum", "spectral density on [0, pi]")
    sp.add_argument("--mixture", help="mixture spec; spectrum by quadrature")
    sp.add_argument("--spectrum", action="append", help="closed-form factor (repeat for a product)")
    sp.add_argument("--grid", type=_positive_int, default=1024)
    sp.add_argument("--rtol", type=float, default=1e-9)

    sp = add("acvf", "autocovariances from a mixture")
    sp.add_argument("--mixture", required=True)
    sp.add_argument("--lags", type=_nonneg_int, default=100)
    sp.add_argument("--rtol", type=float, default=1e-10)

    sp = add("disaggregate", "mixture density of a product spectrum")
    sp.add_argument("--f1", required=True, help="factor mixture on [0, 1]")
    sp.add_argument("--f2", required=True, help="factor mixture on [-1, 0]")
    sp.add_argument("--nodes", type=_positive_int, default=512)

    sp = add("wold", "MA(infinity) coefficients and innovation variance")
    sp.add_argument("--mixture")
    sp.add_argument("--spectrum", action="append")
    sp.add_argument("--J", type=_positive_int, default=4096)
    sp.add_argument("--fft-grid", dest="fft_grid", type=_positive_int, default=2**16)

    sp = add("simulate", "Monte-Carlo panel and comparison with theory")
    sp.add_argument("--mixture", required=True)
    sp.add_argument("--N", type=_positive_int, default=1000)
    sp.add_argument("--T", type=_positive_int, default=4096)
    sp.add_argument("--replicates", type=_positive_int, default=4)
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--lags", type=_nonneg_int, default=100)
    sp.add_argument("--burn-in", dest="burn_in", type=_nonneg_int, default=0)

    sp = add("verify", "run a verification suite", out_required=False)
    sp.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    sp.add_argument("--d", type=float, default=0.25)
    sp.add_argument("--d1", type=float, default=0.2)
    sp.add_argument("--d2", type=float, default=0.3)
    return p


COMMANDS = {
    "mixture": cmd_mixture,
    "spectrum": cmd_spectrum,
    "acvf": cmd_acvf,
    "disaggregate": cmd_disaggregate,
    "wold": cmd_wold,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.threads is None and os.environ.get("AGG_THREADS"):
            args.threads = _positive_int(os.environ["AGG_THREADS"])
        tol: dict = {}
        code = COMMANDS[args.command](args, tol)
    except UsageError as exc:
        print(f"aggmix: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except argparse.ArgumentTypeError as exc:
        print(f"aggmix: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, InconclusiveError) as exc:
        print(f"aggmix: tolerance not met: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (DomainError, AggmixError, ValueError, OSError) as exc:
        print(f"aggmix: error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if getattr(args, "out", None):
        params = {k: v for k, v in vars(args).items() if k not in ("out", "command")}
        write_json(Path(args.out) / "manifest.json", {
            "command": args.command,
            "parameters": params,
            "argv": argv,
            "tool_version": __version__,
            "achieved_tolerances": tol,
            "wall_time_ms": int(round((time.perf_counter() - start) * 1000)),
        })
    return code


def main() -> None:
    sys.exit(run())
