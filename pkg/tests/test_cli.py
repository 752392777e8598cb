import json

import numpy as np
import pytest

from eigenlocus.cli import main
from eigenlocus.dataset import LabeledDataset, save_csv


@pytest.fixture
def two_point_csv(tmp_path):
    p = tmp_path / "two.csv"
    save_csv(LabeledDataset.from_classes([[1.0, 0.0]], [[-1.0, 0.0]]), p)
    return p


def test_train_two_point(tmp_path, two_point_csv, capsys):
    out = tmp_path / "m.json"
    assert main(["train", "--data", str(two_point_csv), "--c", "inf", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "N=2 d=2 sv=2" in text
    tau = [float(v) for v in text.split("tau=")[1].split()]
    np.testing.assert_allclose(tau, [1.0, 0.0], atol=1e-8)
    doc = json.loads(out.read_text())
    np.testing.assert_allclose(doc["tau"], [1.0, 0.0], atol=1e-8)


def test_train_missing_file(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "x.csv"), "--out", str(tmp_path / "m.json")])
    assert code == 3
    assert "file not found: " in capsys.readouterr().err


def test_train_bad_c(two_point_csv, tmp_path):
    assert main(["train", "--data", str(two_point_csv), "--c", "0", "--out", str(tmp_path / "m")]) == 2
    assert main(["train", "--data", str(two_point_csv), "--c", "-1", "--out", str(tmp_path / "m")]) == 2


def test_diagnose_pass_and_corrupted(tmp_path, two_point_csv, capsys):
    model = tmp_path / "m.json"
    main(["train", "--data", str(two_point_csv), "--c", "inf", "--out", str(model)])
    report = tmp_path / "r.json"
    assert main(["diagnose", "--model", str(model), "--data", str(two_point_csv),
                 "--out", str(report)]) == 0
    assert json.loads(report.read_text())["passed"]
    doc = json.loads(model.read_text())
    doc["extremes"][0]["psi"] = 0.9
    model.write_text(json.dumps(doc))
    capsys.readouterr()
    assert main(["diagnose", "--model", str(model), "--data", str(two_point_csv)]) == 1
    assert "KKTE2 equality" in capsys.readouterr().err


def test_diagnose_dimension_mismatch(tmp_path, two_point_csv):
    model = tmp_path / "m.json"
    main(["train", "--data", str(two_point_csv), "--c", "inf", "--out", str(model)])
    other = tmp_path / "three.csv"
    save_csv(LabeledDataset.from_classes([[1.0, 0.0, 1.0]], [[-1.0, 0.0, 1.0]]), other)
    assert main(["diagnose", "--model", str(model), "--data", str(other)]) == 2


def test_predict(tmp_path, two_point_csv):
    model = tmp_path / "m.json"
    main(["train", "--data", str(two_point_csv), "--c", "inf", "--out", str(model)])
    out = tmp_path / "p.csv"
    assert main(["predict", "--model", str(model), "--data", str(two_point_csv), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "score,label" and rows[1].endswith(",1") and rows[2].endswith(",-1")


def _strip(doc):
    doc = dict(doc)
    doc.pop("timestamp")
    doc.pop("elapsed_s")
    return doc


def test_experiment_two_point_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", "two-point", "--outdir", str(a)]) == 0
    assert main(["experiment", "--config", "two-point", "--outdir", str(b)]) == 0
    da = json.loads((a / "summary.json").read_text())
    db = json.loads((b / "summary.json").read_text())
    assert _strip(da) == _strip(db)
    assert (a / "scatter.csv").read_bytes() == (b / "scatter.csv").read_bytes()
    assert (a / "boundary.csv").exists()


def test_experiment_homogeneous(tmp_path):
    assert main(["experiment", "--config", "homogeneous", "--outdir", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert 0.45 <= doc["svm_error"] <= 0.55 and doc["model"]["sv_fraction"] >= 0.90
    assert doc["bayes"]["analytic_error"] == 0.5


def test_experiment_example_two(tmp_path):
    main(["experiment", "--config", "example-two", "--outdir", str(tmp_path)])
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["checks"]["slope"]["passed"] and doc["checks"]["intercept"]["passed"]
    assert doc["checks"]["error_excess"]["passed"]
    boundary = (tmp_path / "boundary.csv").read_text()
    assert "bayes" in boundary and "border_plus" in boundary


def test_experiment_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("EIGENLOCUS_SEED", "5")
    main(["experiment", "--config", "homogeneous", "--outdir", str(tmp_path)])
    assert json.loads((tmp_path / "summary.json").read_text())["seed"] == 5
    monkeypatch.setenv("EIGENLOCUS_SEED", "abc")
    assert main(["experiment", "--config", "homogeneous", "--outdir", str(tmp_path)]) == 2


def test_experiment_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1, "name": "x", "classes": [{"mean": [0, 0]}]}))
    assert main(["experiment", "--config", str(bad), "--outdir", str(tmp_path / "o")]) == 2
    assert "classes" in capsys.readouterr().err
    assert main(["experiment", "--config", str(tmp_path / "none.json"), "--outdir", str(tmp_path)]) == 3


def test_multimeter_json(tmp_path, capsys):
    assert main(["multimeter", "--config", "homogeneous", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["homogeneity_flag"] and doc["separability_grade"] == "homogeneous"


def test_multimeter_small_split(two_point_csv, capsys):
    assert main(["multimeter", "--data", str(two_point_csv)]) == 2
    assert "too small" in capsys.readouterr().err


def test_usage_error():
    assert main(["bogus"]) == 2
