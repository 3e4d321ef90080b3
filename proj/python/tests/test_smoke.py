import math

import numpy as np
import pytest

import pcflab


def test_models_and_describe():
    names = pcflab.model_names()
    assert "Hopf" in names and "Sol0_4" in names
    d = pcflab.describe_model("Sol0_4")
    assert d["jacobi_residual"] < 1e-14
    assert d["nijenhuis_residual"] < 1e-14
    with pytest.raises(pcflab.ValidationError):
        pcflab.describe_model("nope")


def test_tau_star():
    r = pcflab.tau_star({"gamma_pairing": 1.0, "curves": [{"name": "E", "self_intersection": -1, "K_dot": -1, "area": 3.0}]})
    assert r["tau_star"] == 3.0
    assert r["binding_curve"] == "E"
    r = pcflab.tau_star({"gamma_pairing": 1.0, "curves": [{"name": "C", "self_intersection": -2, "K_dot": 0, "area": 1.0}]})
    assert r["tau_star"] == "inf"


def test_hopf_trajectory_converges_to_ray():
    tr = pcflab.integrate_model("Hopf", [0.5, 1.0, 0.1, 0.0], 500.0)
    a, b, r, s = tr["states"][-1]
    assert abs(a - b) / a < 1e-8 and abs(r) < 1e-8 and abs(s) < 1e-8
    assert tr["collapse"] == "none"


def test_formulations_agree():
    rep = pcflab.formulation_report(8, 3, amplitude=0.01)
    assert max(rep["sup_ab"], rep["sup_ac"], rep["sup_bc"]) < 1e-5
    assert rep["rhs_sup"] > 1e-3


def test_run_experiment_and_snapshot(tmp_path):
    cfg = {
        "experiment": "torus_pcf",
        "seed": 7,
        "output": "torus",
        "grid": {"n": 8},
        "alpha": {"nmodes": 4, "kmax": 1, "amplitude": 0.03},
        "t_end": 0.5,
    }
    summary, code = pcflab.run_experiment(cfg, str(tmp_path))
    assert code == 0
    assert summary["status"] == "ok"
    snap = pcflab.read_snapshot(tmp_path / "torus" / "final.pcfs")
    assert snap["kind"] == "hermitian"
    g11, g12 = snap["channels"]["g11"], snap["channels"]["g12"]
    assert g11.shape == (8, 8, 8, 8) and np.iscomplexobj(g12)
    assert math.isclose(snap["t"], 0.5)
    assert (tmp_path / "torus" / "series.csv").read_text().startswith("t,flat_distance")


def test_validation_error_names_field(tmp_path):
    with pytest.raises(pcflab.ValidationError, match=r"config\.grid\.n"):
        pcflab.run_experiment({"experiment": "torus_pcf", "grid": {"n": 12}}, str(tmp_path))


def test_cone_criterion():
    r = pcflab.run_criterion(9)
    assert r["pass"]
