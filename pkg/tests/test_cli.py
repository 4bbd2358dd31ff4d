import json
import math
import subprocess
import sys

import numpy as np
import pytest

from aggmix import __version__
from aggmix.cli import parse_spec, run
from aggmix.io import format_float, read_csv, write_csv
from aggmix.mixture import load_tabulated, product_fi_mixture_closed, save_tabulated, uniform_mixture


def manifest(path):
    return json.loads((path / "manifest.json").read_text(encoding="utf-8"))


def no_stdout(capsys):
    out, _ = capsys.readouterr()
    assert out == ""


# -- spec language -----------------------------------------------------------------------


def test_parse_spec():
    assert parse_spec("fi:d=0.3") == ("fi", {"d": 0.3})
    assert parse_spec("uniform:a=-0.5,b=0.5,s2=2") == ("uniform", {"a": -0.5, "b": 0.5, "s2": 2.0})
    assert parse_spec("table:some/file.csv") == ("table", {"path": "some/file.csv"})


# -- exit codes ---------------------------------------------------------------------------


@pytest.mark.parametrize("argv", [
    ["spectrum", "--mixture", "fi:d=0.7", "--out", "{out}"],
    ["spectrum", "--mixture", "arma:p=1", "--out", "{out}"],
    ["spectrum", "--mixture", "fi:e=0.2", "--out", "{out}"],
    ["spectrum", "--mixture", "fi:d=abc", "--out", "{out}"],
    ["spectrum", "--mixture", "fi", "--out", "{out}"],
    ["spectrum", "--mixture", "fi:d=0.3", "--bogus", "--out", "{out}"],
    ["spectrum", "--mixture", "fi:d=0.3", "--spectrum", "fi:d=0.3", "--out", "{out}"],
    ["mixture", "--mixture", "uniform:a=0.5,b=0.2", "--out", "{out}"],
    ["mixture", "--mixture", "table:/nonexistent/phi.csv", "--out", "{out}"],
    ["disaggregate", "--f1", "sfi:d=0.2", "--f2", "fi:d=0.3", "--out", "{out}"],
    ["simulate", "--mixture", "fi:d=0.3", "--N", "0", "--out", "{out}"],
    ["verify", "--suite", "asymptotics", "--d1", "0.7"],
    ["verify", "--suite", "nonsense"],
    ["frobnicate"],
    [],
])
def test_invalid_input_exits_one(tmp_path, capsys, argv):
    argv = [a.replace("{out}", str(tmp_path / "o")) for a in argv]
    assert run(argv) == 1
    out, err = capsys.readouterr()
    assert out == "" and err.startswith("aggmix:")


def test_range_is_reported(capsys, tmp_path):
    run(["spectrum", "--mixture", "fi:d=0.7", "--out", str(tmp_path)])
    assert "0 < d < 0.5" in capsys.readouterr().err


def test_tolerance_failure_exits_two(tmp_path, capsys):
    # a spectral peak too narrow for the FFT grid triggers the aliasing check
    code = run(["wold", "--spectrum", "uniform:a=0.995,b=0.999", "--J", "8", "--fft-grid", "64",
                "--out", str(tmp_path)])
    assert code == 2
    assert "tolerance" in capsys.readouterr().err


def test_verify_asymptotics_exit_zero(capsys):
    assert run(["verify", "--suite", "asymptotics", "--d1", "0.2", "--d2", "0.3"]) == 0
    no_stdout(capsys)


@pytest.mark.parametrize("suite", ["cd", "fi", "product", "wold"])
def test_verify_suites(suite, tmp_path):
    assert run(["verify", "--suite", suite, "--out", str(tmp_path)]) == 0
    m = manifest(tmp_path)
    assert m["achieved_tolerances"]["suites"] == {suite: True}


# -- outputs ------------------------------------------------------------------------------


def test_spectrum_matches_fi_closed_form(tmp_path, capsys):
    assert run(["spectrum", "--mixture", "fi:d=0.3", "--grid", "65", "--out", str(tmp_path)]) == 0
    no_stdout(capsys)
    header, data = read_csv(tmp_path / "spectrum.csv")
    assert header == ["lambda", "f"]
    lam, f = data[:, 0], data[:, 1]
    assert lam[0] == 0.0 and math.isinf(f[0])
    assert lam[-1] == math.pi
    expected = (2 * np.sin(lam[1:] / 2)) ** -0.6 / (2 * math.pi)
    assert np.max(np.abs(f[1:] / expected - 1)) <= 1e-6
    m = manifest(tmp_path)
    assert m["command"] == "spectrum"
    assert m["tool_version"] == __version__
    assert isinstance(m["wall_time_ms"], int)
    assert set(m) >= {"command", "parameters", "argv", "tool_version", "achieved_tolerances", "wall_time_ms"}


def test_spectrum_product_of_closed_forms(tmp_path):
    assert run(["spectrum", "--spectrum", "fi:d=0.2", "--spectrum", "sfi:d=0.3", "--grid", "9",
                "--out", str(tmp_path)]) == 0
    _, data = read_csv(tmp_path / "spectrum.csv")
    lam = data[1:-1, 0]
    expected = (2 * np.sin(lam / 2)) ** -0.4 * (2 * np.cos(lam / 2)) ** -0.6 / (4 * math.pi**2)
    assert np.allclose(data[1:-1, 1], expected, rtol=1e-13, atol=0)


def test_disaggregate_outputs(tmp_path):
    assert run(["disaggregate", "--f1", "fi:d=0.2", "--f2", "sfi:d=0.3", "--out", str(tmp_path)]) == 0
    m = manifest(tmp_path)
    tol = m["achieved_tolerances"]
    assert tol["c_star"] > 0 and tol["noise_variance"] > 0
    assert tol["normalization_error"] < 1e-6
    closed, _ = product_fi_mixture_closed(0.2, 0.3)
    _, data = read_csv(tmp_path / "mixture.csv")
    x, values = data[:, 0], data[:, 1]
    inner = (np.abs(x) >= 0.1) & (np.abs(x) <= 0.9)
    assert np.allclose(values[inner], closed.pdf(x[inner]), rtol=1e-5, atol=0)
    # reloading renormalizes the piecewise-linear table, which smears the
    # integrable spike at the origin; a few parts in a thousand are expected
    phi = load_tabulated(tmp_path / "mixture.csv")
    xs = np.array([-0.7, -0.3, 0.3, 0.7])
    assert np.allclose(phi.pdf(xs), closed.pdf(xs), rtol=5e-3)


def test_acvf_and_mixture_commands(tmp_path):
    assert run(["acvf", "--mixture", "uniform:a=-0.5,b=0.5", "--lags", "5", "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "acvf.csv")
    assert header == ["h", "gamma"]
    assert data[0, 1] == pytest.approx(2 * math.atanh(0.5), rel=1e-9)
    assert run(["mixture", "--mixture", "fi:d=0.25", "--grid", "32", "--out", str(tmp_path)]) == 0
    assert manifest(tmp_path)["achieved_tolerances"]["long_memory"] is True


def test_table_spec(tmp_path):
    path = save_tabulated(uniform_mixture(-0.4, 0.4), tmp_path / "phi.csv", grid=np.linspace(-0.4, 0.4, 9))
    assert run(["acvf", "--mixture", f"table:{path}", "--lags", "3", "--out", str(tmp_path / "o")]) == 0
    _, data = read_csv(tmp_path / "o" / "acvf.csv")
    assert data[0, 1] == pytest.approx(math.atanh(0.4) / 0.4, rel=1e-6)


def test_wold_outputs(tmp_path):
    assert run(["wold", "--spectrum", "fi:d=0.3", "--J", "256", "--fft-grid", "4096", "--out", str(tmp_path)]) == 0
    _, data = read_csv(tmp_path / "psi.csv")
    assert data[0, 1] == 1.0 and data[1, 1] == pytest.approx(0.3, rel=1e-6)
    tol = manifest(tmp_path)["achieved_tolerances"]
    assert tol["sigma2_relative_difference"] < 1e-6
    assert tol["acvf_tail_bound"] > 0


# -- reproducibility ------------------------------------------------------------------------


SIMULATE = ["simulate", "--mixture", "uniform:a=-0.5,b=0.5", "--N", "20", "--T", "128",
            "--replicates", "3", "--lags", "5", "--seed", "42"]


def test_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "run"
    assert run(SIMULATE + ["--out", str(out)]) == 0
    first = {p.name: p.read_bytes() for p in out.glob("*.csv")}
    m1 = manifest(out)
    # the manifest alone is enough to re-run the command
    assert run(m1["argv"]) == 0
    second = {p.name: p.read_bytes() for p in out.glob("*.csv")}
    assert first == second
    assert set(first) == {"aggregate.csv", "acf.csv", "periodogram.csv"}
    m2 = manifest(out)
    m1.pop("wall_time_ms"), m2.pop("wall_time_ms")
    assert m1 == m2
    assert sorted(p.name for p in out.iterdir() if p.suffix == ".json") == ["manifest.json"]


def test_output_independent_of_thread_count(tmp_path, monkeypatch):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run(["--threads", "1"] + SIMULATE + ["--out", str(a)]) == 0
    assert run(["--threads", "3"] + SIMULATE + ["--out", str(b)]) == 0
    monkeypatch.setenv("AGG_THREADS", "2")
    assert run(SIMULATE + ["--out", str(c)]) == 0
    for name in ("aggregate.csv", "acf.csv", "periodogram.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "aggmix", "verify", "--suite", "cd"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == ""


# -- CSV formatting ---------------------------------------------------------------------------


def test_csv_round_trip_formatting(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, 2.0**-1074, -123456.789, math.inf, math.pi]
    path = write_csv(tmp_path / "x.csv", ["i", "v"], [list(range(len(vals))), vals])
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "i,v"
    assert lines[1] == "0,0.1"
    _, data = read_csv(path)
    assert data[:, 1].tolist() == vals
    assert format_float(np.float64(1 / 3)) == repr(1 / 3)
    with pytest.raises(ValueError):
        write_csv(tmp_path / "y.csv", ["a"], [[1], [2]])
