import json
from fractions import Fraction as F

import numpy as np
import pytest

from cradle.chains import chain_to_jacobi, dual_hahn_ratios
from cradle.cli import main
from cradle.io import ChainDocument
from cradle.spectral import dense_eigenvalues


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("CRADLE_TOL", raising=False)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def report(capsys):
    return json.loads(capsys.readouterr().out)


def test_build_dual_hahn(workdir, capsys):
    assert run("build", "--free-free", "-N", 12, "--rho", 1, "-Z", 2, "-o", "dh.json") == 0
    out = capsys.readouterr().out
    assert "m_i/m_0" in out
    doc = ChainDocument.load("dh.json")
    m, _ = dual_hahn_ratios(12)
    np.testing.assert_allclose(doc.masses, [float(x) for x in m], rtol=1e-15)
    assert doc.provenance.value == "closed_form"
    assert doc.params.c == F(1, 2)


def test_build_fixed_fixed(workdir):
    assert run("build", "--fixed-fixed", "-N", 9, "--mu", 1, "--rho", 1, "-Z", 4, "-o", "fx.json") == 0
    doc = ChainDocument.load("fx.json")
    assert doc.provenance.value == "gamma_sum"
    assert doc.springs[0] == pytest.approx(doc.springs[-1], rel=1e-12)
    assert doc.certificates["spectrum"]["passed"]


def test_build_rejects_common_factor(workdir, capsys):
    assert run("build", "--free-free", "-N", 5, "--rho", 2, "-Z", 4) == 2
    assert "gcd" in capsys.readouterr().err


def test_build_rejects_even_rho(workdir, capsys):
    assert run("build", "--fixed-fixed", "-N", 5, "--mu", 1, "--rho", 2, "-Z", 4) == 2
    assert "must be odd" in capsys.readouterr().err


def test_build_relaxed_explicit_c(workdir):
    assert run("build", "--free-free", "-N", 6, "--c", "1/3", "--relaxed",
               "--omega-tilde", "2pi/N", "-o", "r.json") == 0
    doc = ChainDocument.load("r.json")
    assert doc.params.omega_tilde == pytest.approx(2 * np.pi / 6)


def test_verify_transfer(workdir, capsys):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "-o", "c.json")
    capsys.readouterr()
    assert run("verify", "c.json", "--pt") == 0
    assert report(capsys)["certificates"]["pt"]["passed"]


def test_verify_deformed_transfer_fails(workdir, capsys):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "--alpha", "1/4", "-o", "d.json")
    capsys.readouterr()
    assert run("verify", "d.json", "--pt") == 1
    amps = report(capsys)["certificates"]["pt"]["terminal_amplitudes"]
    np.testing.assert_allclose(amps, [0.5, np.sqrt(3) / 2], atol=1e-8)


def test_verify_default_certificates_and_report_file(workdir, capsys):
    run("build", "--fixed-fixed", "-N", 7, "--mu", 1, "--rho", 3, "-Z", 8, "-o", "f.json")
    capsys.readouterr()
    assert run("verify", "f.json", "--report", "rep.json") == 0
    rep = report(capsys)
    assert set(rep["certificates"]) == {"spectrum", "pt", "fr", "mirror"}
    assert json.loads((workdir / "rep.json").read_text()) == rep


def test_verify_conservation(workdir, capsys):
    run("build", "--free-free", "-N", 6, "--rho", 1, "-Z", 4, "-o", "c.json")
    capsys.readouterr()
    assert run("verify", "c.json", "--conservation") == 0
    cert = report(capsys)["certificates"]["conservation"]
    assert cert["energy_drift"] < 1e-8 and cert["momentum_drift"] < 1e-10


def test_tolerance_override(workdir, capsys, monkeypatch):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "-o", "c.json")
    monkeypatch.setenv("CRADLE_TOL", "dynamics=1e-30")
    assert run("verify", "c.json", "--pt") == 1
    monkeypatch.setenv("CRADLE_TOL", "bogus=1")
    assert run("verify", "c.json", "--pt") == 2


def test_transform_deform_then_verify_revival(workdir, capsys):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "-o", "c.json")
    assert run("transform", "c.json", "--deform", "--alpha", "1/4", "-o", "d.json") == 0
    doc = ChainDocument.load("d.json")
    assert doc.provenance.value == "deformed" and doc.certificates["spectrum"]["passed"]
    capsys.readouterr()
    assert run("verify", "d.json", "--fr") == 0


def test_transform_deform_half_is_identity(workdir):
    run("build", "--fixed-fixed", "-N", 6, "--mu", 1, "--rho", 1, "-Z", 4, "-o", "c.json")
    run("transform", "c.json", "--deform", "--alpha", "1/2", "-o", "same.json")
    a = json.loads((workdir / "c.json").read_text())
    b = json.loads((workdir / "same.json").read_text())
    assert a["masses"] == b["masses"] and a["springs"] == b["springs"]


def test_transform_surgery(workdir, capsys):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "-o", "c.json")
    assert run("transform", "c.json", "--surgery", "--remove-pair", 3, 4, "-o", "s.json") == 0
    doc = ChainDocument.load("s.json")
    full = ChainDocument.load("c.json")
    assert doc.masses.size == 8 and doc.removed == (3, 4)
    np.testing.assert_allclose(doc.masses, doc.masses[::-1], rtol=1e-10)
    lam = dense_eigenvalues(chain_to_jacobi(doc.to_chain()))
    np.testing.assert_allclose(lam, np.delete(full.spectrum, [3, 4]), atol=1e-10 * lam.max())
    capsys.readouterr()
    assert run("verify", "s.json", "--spectrum", "--pt", "--fr") == 0
    # a second surgery maps indices through the surviving lattice
    assert run("transform", "s.json", "--surgery", "--remove-pair", 3, 4, "-o", "s2.json") == 0
    assert ChainDocument.load("s2.json").removed == (3, 4, 5, 6)
    assert run("verify", "s2.json", "--spectrum") == 0


def test_transform_rejects_bad_surgery(workdir, capsys):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "-o", "c.json")
    assert run("transform", "c.json", "--surgery", "--remove", 4, "-o", "x.json") == 2
    assert run("transform", "c.json", "--surgery", "--remove-pair", 2, 4, "-o", "x.json") == 2


def test_simulate_snapshots(workdir, capsys):
    run("build", "--free-free", "-N", 9, "--rho", 1, "-Z", 4, "-o", "c.json")
    assert run("simulate", "c.json", "--snapshots", "snaps", "--at", "transfer") == 0
    names = sorted(p.name for p in (workdir / "snaps").iterdir())
    assert len(names) == 5 and names[0] == "snapshot_tstar_0.00.csv"
    last = np.loadtxt(workdir / "snaps" / "snapshot_tstar_1.00.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(last[:, 2], np.r_[np.zeros(9), 1.0], atol=1e-8)


def test_simulate_revival_schedule(workdir):
    run("build", "--free-free", "-N", 9, "--rho", 3, "-Z", 8, "--alpha", "1/4", "-o", "d.json")
    assert run("simulate", "d.json", "--snapshots", "snaps", "--at", "revival") == 0
    assert len(list((workdir / "snaps").iterdir())) == 5  # tau_0 .. tau_4 for Z = 8


def test_simulate_ode_energy_column(workdir):
    run("build", "--fixed-fixed", "-N", 6, "--mu", 1, "--rho", 1, "-Z", 4, "-o", "f.json")
    assert run("simulate", "f.json", "--engine", "ode", "--dt", "auto", "--csv", "t.csv") == 0
    data = np.loadtxt(workdir / "t.csv", delimiter=",", skiprows=1)
    E = data[:, -1]
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-8


def test_simulate_step_too_large(workdir, capsys):
    run("build", "--free-free", "-N", 6, "--rho", 1, "-Z", 4, "-o", "c.json")
    assert run("simulate", "c.json", "--engine", "ode", "--dt", "5.0") == 2
    assert "dt" in capsys.readouterr().err


def test_verify_sweep(workdir, capsys):
    assert run("verify", "--sweep", "both", "--n-max", 5, "--workers", 2) == 0
    rep = report(capsys)
    assert rep["passed"]
    keys = [(p["boundary"], p["N"], p["mu"], p["rho"], p["Z"]) for p in rep["points"]]
    assert keys == sorted(keys)


def test_sweep_is_order_independent(workdir, capsys):
    run("verify", "--sweep", "free-free", "--n-max", 4, "--workers", 1)
    serial = capsys.readouterr().out
    run("verify", "--sweep", "free-free", "--n-max", 4, "--workers", 3)
    assert capsys.readouterr().out == serial


def test_missing_file(workdir, capsys):
    assert run("verify", "nope.json") == 2


def test_figures(workdir, capsys):
    assert run("figures", "-o", "figs", "-N", 8) == 0
    names = {p.name for p in (workdir / "figs").iterdir()}
    assert {n.split("_")[0] for n in names} == {f"fig{i}" for i in range(1, 8)}
    assert "fig1_c1_4.csv" in names
    # regenerating gives identical bytes
    before = {n: (workdir / "figs" / n).read_bytes() for n in names}
    run("figures", "-o", "figs", "-N", 8)
    assert all((workdir / "figs" / n).read_bytes() == b for n, b in before.items())
