import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from jacobi_debranges import wave_dynamics
from jacobi_debranges.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from jacobi_debranges.krein import read_response_csv
from jacobi_debranges.wave_dynamics import read_control_csv


def write_config(path, **data):
    path.write_text(json.dumps(data))
    return str(path)


def read_table(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.fixture
def sym2_config(tmp_path):
    return write_config(tmp_path / "sym2.json", a=[1.0], b=[0.0, 0.0])


@pytest.fixture
def free_config(tmp_path):
    return write_config(tmp_path / "free.json", a=[], b=[0.0])


# ---- spectra


def test_spectra_sym2(tmp_path, sym2_config):
    out = tmp_path / "o"
    assert main(["spectra", "--config", sym2_config, "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "spectra.json").read_text())
    np.testing.assert_allclose(data["lambdas"], [-1, 1], atol=1e-14)
    np.testing.assert_allclose(data["rhos"], [2, 2], rtol=1e-14)
    header, table = read_table(out / "polynomials.csv")
    assert header == ["lambda", "phi_1", "phi_2", "phi_3"]
    np.testing.assert_allclose(table[:, 2], table[:, 0], atol=1e-15)
    tau, r = read_response_csv(out / "response_function.csv")
    np.testing.assert_allclose(r, (np.sinh(tau) + np.sin(tau)) / 2, rtol=1e-13, atol=1e-15)


def test_spectra_n1(tmp_path, free_config):
    out = tmp_path / "o"
    assert main(["spectra", "--config", free_config, "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "spectra.json").read_text())
    assert data["lambdas"] == [0.0] and data["rhos"] == [1.0]


def test_spectra_deterministic(tmp_path):
    for name in ["a", "b"]:
        assert main(["spectra", "--n", "5", "--seed", "11", "--out", str(tmp_path / name)]) == EXIT_OK
    for f in ["spectra.json", "polynomials.csv", "response_function.csv"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert main(["spectra", "--n", "5", "--seed", "12", "--out", str(tmp_path / "c")]) == EXIT_OK
    assert (tmp_path / "a" / "spectra.json").read_bytes() != (tmp_path / "c" / "spectra.json").read_bytes()


def test_generator_block(tmp_path):
    cfg = write_config(tmp_path / "g.json", generator={"n": 4, "seed": 3, "b_range": [0, 1], "a_range": [1, 2]})
    out = tmp_path / "o"
    assert main(["spectra", "--config", cfg, "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "spectra.json").read_text())
    assert len(data["b"]) == 4
    assert all(0 <= b <= 1 for b in data["b"]) and all(1 <= a <= 2 for a in data["a"])


# ---- usage errors


@pytest.mark.parametrize(
    "content",
    ["not json", "[1, 2]", json.dumps({"a": [1.0, 2.0], "b": [0.0, 0.0]}), json.dumps({"a": [-1.0], "b": [0, 0]})],
)
def test_bad_config_exit_2(tmp_path, content, capsys):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert main(["spectra", "--config", str(path), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["verify", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE


@pytest.mark.parametrize("args", [["--grid", "100"], ["--T", "0"], ["--T", "-1"]])
def test_bad_grid_or_time_exit_2(tmp_path, args):
    assert main(["spectra", "--out", str(tmp_path)] + args) == EXIT_USAGE


def test_even_grid_is_made_odd(tmp_path, sym2_config):
    assert main(["spectra", "--config", sym2_config, "--grid", "300", "--out", str(tmp_path)]) == EXIT_OK
    # the response function is sampled on [0, 2T] with the same step
    tau, _ = read_response_csv(tmp_path / "response_function.csv")
    assert tau.size == 601


def test_bad_control_exit_2(tmp_path, sym2_config):
    bad = tmp_path / "c.csv"
    bad.write_text("x,y\n1,2\n")
    assert main(["simulate", "--config", sym2_config, "--control", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE


# ---- simulate


def test_simulate_zero_control(tmp_path, sym2_config):
    grid = np.linspace(0, 1, 201)
    ctrl = tmp_path / "zero.csv"
    ctrl.write_text("t,re,im\n" + "".join(f"{float(t)!r},0.0,0.0\n" for t in grid))
    out = tmp_path / "o"
    assert main(["simulate", "--config", sym2_config, "--control", str(ctrl), "--out", str(out)]) == EXIT_OK
    header, table = read_table(out / "trajectory.csv")
    assert header == ["t", "u_1", "u_2"]
    assert np.all(table[:, 1:] == 0)


def test_simulate_free_particle(tmp_path, free_config):
    out = tmp_path / "o"
    assert main(["simulate", "--config", free_config, "--grid", "401", "--out", str(out)]) == EXIT_OK
    header, table = read_table(out / "trajectory.csv")
    assert header == ["t", "u_1"]
    np.testing.assert_allclose(table[:, 1], table[:, 0] ** 2 / 2, atol=1e-13)
    resp = read_control_csv(out / "response.csv")
    np.testing.assert_allclose(resp.values.real, resp.grid.t**2 / 2, atol=1e-13)


def test_simulate_sbasis_vs_sampled(tmp_path):
    cfg = write_config(tmp_path / "m.json", a=[0.8, 1.3], b=[0.2, -0.5, 1.1])
    coeffs = {"re": [0.4, -1.0, 0.7], "T": 1.0}
    jpath = tmp_path / "c.json"
    jpath.write_text(json.dumps(coeffs))
    assert main(["simulate", "--config", cfg, "--control", str(jpath), "--out", str(tmp_path / "s")]) == EXIT_OK

    from jacobi_debranges import JacobiMatrix, SBasisControl, TimeGrid, spectral_decomposition
    from jacobi_debranges.wave_dynamics import write_control_csv

    sd = spectral_decomposition(JacobiMatrix(a=[0.8, 1.3], b=[0.2, -0.5, 1.1]))
    cpath = tmp_path / "c.csv"
    write_control_csv(cpath, SBasisControl(sd, 1.0, coeffs["re"]).sample(TimeGrid(1.0, 2001)))
    assert main(["simulate", "--config", cfg, "--control", str(cpath), "--out", str(tmp_path / "g")]) == EXIT_OK
    _, a = read_table(tmp_path / "s" / "trajectory.csv")
    _, b = read_table(tmp_path / "g" / "trajectory.csv")
    assert np.max(np.abs(a[-1, 1:] - b[-1, 1:])) < 1e-7
    assert np.max(np.abs(a[:, 1:] - b[:, 1:])) < 1e-7


def test_simulate_complex_control(tmp_path, sym2_config):
    grid = np.linspace(0, 1, 201)
    ctrl = tmp_path / "c.csv"
    ctrl.write_text("t,re,im\n" + "".join(f"{float(t)!r},0.0,1.0\n" for t in grid))
    assert main(["simulate", "--config", sym2_config, "--control", str(ctrl), "--out", str(tmp_path)]) == EXIT_OK
    header, table = read_table(tmp_path / "trajectory.csv")
    assert header == ["t", "u_1", "u_2", "u_1_im", "u_2_im"]
    assert np.all(table[:, 1:3] == 0)


# ---- reconstruct


def test_reconstruct_round_trip(tmp_path):
    cfg = write_config(tmp_path / "m.json", generator={"n": 2, "seed": 4})
    out = tmp_path / "o"
    assert main(["reconstruct", "--config", cfg, "--grid", "4001", "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "reconstruction.json").read_text())
    assert data["max_relative_error"] < 1e-3


def test_reconstruct_from_r_file(tmp_path, sym2_config):
    assert main(["spectra", "--config", sym2_config, "--grid", "4001", "--out", str(tmp_path)]) == EXIT_OK
    rfile = str(tmp_path / "response_function.csv")
    assert main(["reconstruct", "--config", sym2_config, "--r-file", rfile, "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "reconstruction.json").read_text())
    np.testing.assert_allclose(data["a"] + data["b"], [1, 0, 0], atol=1e-3)


def test_reconstruct_exact_path(tmp_path):
    out = tmp_path / "o"
    assert main(["reconstruct", "--n", "5", "--seed", "2", "--exact-path", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "reconstruction.json").read_text())["max_error"] < 1e-8


def test_reconstruct_wrong_n(tmp_path, sym2_config, capsys):
    code = main(["reconstruct", "--config", sym2_config, "--target-n", "4", "--out", str(tmp_path)])
    assert code == EXIT_FAIL
    assert "rank" in capsys.readouterr().err
    assert not (tmp_path / "reconstruction.json").exists()


# ---- debranges


def test_debranges_sym2(tmp_path, sym2_config):
    assert main(["debranges", "--config", sym2_config, "--out", str(tmp_path)]) == EXIT_OK
    kappa = json.loads((tmp_path / "kappa.json").read_text())
    assert kappa["kappa_B"][0] == pytest.approx(1 / np.pi, rel=1e-6)
    assert kappa["kappa_E"][0] == pytest.approx(np.pi, rel=1e-9)
    _, margin = read_table(tmp_path / "hb_margin.csv")
    assert np.all(margin[:, 2] > 0)
    axioms = json.loads((tmp_path / "axioms.json").read_text())
    assert axioms["point_evaluation"] and axioms["conjugation"] and axioms["blaschke"]


def test_debranges_n1_samples(tmp_path, free_config):
    assert main(["debranges", "--config", free_config, "--out", str(tmp_path)]) == EXIT_OK
    header, table = read_table(tmp_path / "E_samples.csv")
    assert header == ["lambda", "re", "im", "abs2"]
    lam = table[:, 0]
    expect = np.sqrt(np.pi) * (1 - 1j * lam)
    np.testing.assert_allclose(table[:, 1] + 1j * table[:, 2], expect, rtol=1e-14)
    np.testing.assert_allclose(table[:, 3], np.pi * (1 + lam**2), rtol=1e-14)


def test_debranges_deterministic(tmp_path):
    for name in ["a", "b"]:
        assert main(["debranges", "--n", "4", "--seed", "5", "--out", str(tmp_path / name)]) == EXIT_OK
    for f in ["E_samples.csv", "hb_margin.csv", "kappa.json", "axioms.json"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


# ---- verify


def test_verify_default(capsys):
    assert main(["verify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.strip().splitlines()[-1].endswith("checks passed")


def test_verify_detects_kernel_sign_error(monkeypatch, capsys):
    good = wave_dynamics.s_kernel
    monkeypatch.setattr(wave_dynamics, "s_kernel", lambda t, lam: good(t, -np.asarray(lam)))
    assert main(["verify"]) == EXIT_FAIL
    captured = capsys.readouterr()
    assert "wave.kernel_ode" in captured.err
    assert "FAIL" in captured.out


def test_verify_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "jacobi_debranges", "verify", "--seed", "1"], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "jacobi_debranges", "verify", "--grid", "5"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
