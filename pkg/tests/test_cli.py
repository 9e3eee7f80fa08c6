import hashlib
import json
from pathlib import Path

import pytest

from doselab.cli import main

CASE = {
    "age": 62, "weight_kg": 85.0, "sex": "male", "asa_class": 3,
    "surgery_duration_min": 120.0, "surgery_type": 1,
    "chronic_opioid_use": False, "comorbidity_score": 2.5,
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--n", "300", "--seed", "3", "--noiseless",
                 "--out", str(root / "data")]) == 0
    assert main(["train", "--cohort", str(root / "data"),
                 "--learners", "decision_tree,knn",
                 "--out", str(root / "models")]) == 0
    (root / "case.json").write_text(json.dumps(CASE))
    return root


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestGenerate:
    def test_reruns_are_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["generate", "--n", "120", "--seed", "9",
                         "--out", str(tmp_path / sub)]) == 0
        assert _sha(tmp_path / "a" / "cohort.csv") == _sha(tmp_path / "b" / "cohort.csv")
        assert (_sha(tmp_path / "a" / "ground_truth.json")
                == _sha(tmp_path / "b" / "ground_truth.json"))

    def test_zero_n_is_usage_error(self, tmp_path, capsys):
        assert main(["generate", "--n", "0", "--out", str(tmp_path / "x")]) == 2

    def test_missing_scm_file_is_io_error(self, tmp_path, capsys):
        code = main(["generate", "--n", "5", "--scm", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x")])
        assert code == 1
        assert "nope.json" in capsys.readouterr().err

    def test_rerun_from_manifest_reproduces_output(self, workdir, tmp_path):
        manifest = json.loads((workdir / "data" / "manifest.json").read_text())
        config = {k: v for k, v in manifest["config"].items() if v is not None}
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        assert main(["generate", "--n", "1", "--out", str(tmp_path / "redo"),
                     "--config", str(config_path)]) == 0
        assert _sha(tmp_path / "redo" / "cohort.csv") == _sha(
            workdir / "data" / "cohort.csv")


class TestTrain:
    def test_artifacts_and_curves_written(self, workdir):
        models = workdir / "models"
        assert (models / "model_decision_tree.json").exists()
        assert (models / "model_knn.json").exists()
        assert (models / "manifest.json").exists()
        curves = (models / "loss_curves_decision_tree.csv").read_text()
        assert curves.startswith("endpoint,round,train_loss,val_loss")

    def test_unknown_learner_is_usage_error(self, workdir, tmp_path):
        code = main(["train", "--cohort", str(workdir / "data"),
                     "--learners", "quantum_svm", "--out", str(tmp_path / "m")])
        assert code == 2

    def test_retrain_is_byte_identical(self, workdir, tmp_path):
        assert main(["train", "--cohort", str(workdir / "data"),
                     "--learners", "decision_tree",
                     "--out", str(tmp_path / "m2")]) == 0
        assert _sha(tmp_path / "m2" / "model_decision_tree.json") == _sha(
            workdir / "models" / "model_decision_tree.json")


class TestRecommendAndCurves:
    def test_orade_only_prints_zero_dose(self, workdir, capsys):
        assert main(["recommend", "--model", str(workdir / "models" / "model_knn.json"),
                     "--case", str(workdir / "case.json"),
                     "--weights", "0,1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["dose_meq"] == 0.0

    def test_curves_csv_has_header_and_grid_rows(self, workdir, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        assert main(["curves", "--model", str(workdir / "models" / "model_knn.json"),
                     "--case", str(workdir / "case.json"), "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "dose_meq,pain_hat,orade_hat,utility,pain_spread,orade_spread"
        assert len(lines) == 42

    def test_invalid_case_is_validation_error(self, workdir, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({**CASE, "age": 15}))
        code = main(["recommend", "--model", str(workdir / "models" / "model_knn.json"),
                     "--case", str(bad)])
        assert code == 3

    def test_missing_model_is_io_error(self, workdir, tmp_path):
        code = main(["recommend", "--model", str(tmp_path / "missing.json"),
                     "--case", str(workdir / "case.json")])
        assert code == 1


class TestEvaluate:
    def test_emits_exactly_two_carried_forward(self, workdir, capsys):
        out = workdir / "eval"
        assert main(["evaluate", "--cohort", str(workdir / "data"),
                     "--models", str(workdir / "models"),
                     "--out", str(out)]) == 0
        payload = json.loads((out / "reports.json").read_text())
        assert len(payload["carried_forward"]) == 2
        assert (out / "reports.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["retention_used"] is True

    def test_retention_reuse_refused_without_force(self, workdir, capsys):
        out = workdir / "eval"
        code = main(["evaluate", "--cohort", str(workdir / "data"),
                     "--models", str(workdir / "models"), "--out", str(out)])
        assert code == 3
        assert main(["evaluate", "--cohort", str(workdir / "data"),
                     "--models", str(workdir / "models"), "--out", str(out),
                     "--force"]) == 0

    def test_evaluate_reports_are_deterministic(self, workdir, tmp_path, capsys):
        for sub in ("e1", "e2"):
            assert main(["evaluate", "--cohort", str(workdir / "data"),
                         "--models", str(workdir / "models"),
                         "--out", str(tmp_path / sub)]) == 0
        assert _sha(tmp_path / "e1" / "reports.json") == _sha(
            tmp_path / "e2" / "reports.json")


class TestDiagnose:
    def test_table_prints_and_sums(self, workdir, capsys):
        assert main(["diagnose", "--cohort", str(workdir / "data"),
                     "--min-count", "1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert sum(sum(row) for row in payload["counts"]) == 300
