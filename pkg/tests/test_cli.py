import json

import numpy as np
import pandas as pd
import pytest

from spellforge.application import main
from spellforge.features.matrix import read_features, with_interactions
from spellforge.learners.base import predict
from spellforge.learners.codec import load_model

SMALL_LADDER = {
    "entries": [
        {"name": "m1", "label": "Heuristic", "learner": "ols", "inputs": ["heuristic"]},
        {
            "name": "m2",
            "learner": "lasso",
            "inputs": ["baseline"],
            "grid": {"params": {"lambda": {"min": 0.01, "max": 1.0, "count": 3, "relative_to": "lambda_max"}}},
        },
        {"name": "m3", "learner": "ensemble", "components": ["m1", "m2"]},
    ]
}


def error_report(capsys) -> dict:
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    cohort, features, trained = root / "cohort", root / "features", root / "train"
    assert main(["synth", "--n-persons", "120", "--seed", "11", "--threads", "1", "--out", str(cohort)]) == 0
    assert (
        main(
            [
                "features",
                str(cohort / "spells.csv"),
                str(cohort / "persons.csv"),
                "--jobs", str(cohort / "jobs.csv"),
                "--events", str(cohort / "events.csv"),
                "--parent-links", str(cohort / "parent_links.csv"),
                "--out", str(features),
            ]
        )
        == 0
    )
    ladder = root / "ladder.json"
    ladder.write_text(json.dumps(SMALL_LADDER), encoding="utf-8")
    assert main(["train", str(features / "features.csv"), "--ladder", str(ladder), "--seed", "5", "--out", str(trained)]) == 0
    return root


class TestPipeline:
    def test_synth_outputs(self, pipeline):
        cohort = pipeline / "cohort"
        for name in ("spells.csv", "persons.csv", "truth.csv", "dgp.json", "manifest.json"):
            assert (cohort / name).exists()
        manifest = json.loads((cohort / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seeds"]["seed"] == 11

    def test_feature_outputs(self, pipeline):
        X = read_features(pipeline / "features" / "features.csv")
        assert X.n == 120
        outcomes = pd.read_csv(pipeline / "features" / "outcomes.csv")
        assert {"person_id", "isprop", "isprop_2011_2014"} <= set(outcomes.columns)
        assert outcomes["isprop"].between(0.0, 1.0).all()

    def test_train_outputs(self, pipeline):
        trained = pipeline / "train"
        report = json.loads((trained / "report.json").read_text(encoding="utf-8"))
        assert [row["name"] for row in report["rows"]] == ["m1", "m2", "m3"]
        assert report["n_train"] + report["n_holdout"] == 120
        assert len(report["histogram"]) == 52
        for row in report["rows"]:
            assert (trained / row["model_file"]).exists()
        assert (trained / "manifest.json").exists()

    def test_evaluate_matches_the_training_report(self, pipeline, tmp_path, capsys):
        trained = pipeline / "train"
        argv = ["evaluate", str(pipeline / "features" / "features.csv"), str(trained / "report.json")]
        assert main([*argv, "--seed", "5", "--out", str(tmp_path)]) == 0
        assert "m3: MSE" in capsys.readouterr().out
        evaluation = json.loads((tmp_path / "evaluation.json").read_text(encoding="utf-8"))
        report = json.loads((trained / "report.json").read_text(encoding="utf-8"))
        for scored, row in zip(evaluation["rows"], report["rows"]):
            assert scored["label"] == row["name"]
            assert scored["report"]["mse"] == pytest.approx(row["holdout"]["mse"])

    def test_report_renders_table_and_histogram(self, pipeline, capsys):
        trained = pipeline / "train"
        assert main(["report", str(trained / "report.json")]) == 0
        table = capsys.readouterr().out
        assert table.splitlines()[1].split()[:3] == ["Model", "Predictors", "MSE"]
        assert (trained / "report.txt").read_text(encoding="utf-8") == table
        histogram = pd.read_csv(trained / "histogram.csv")
        assert len(histogram) == 52
        assert histogram["count"].sum() == 120
        assert (trained / "report_manifest.json").exists()

    def test_cluster_groups_the_at_risk_rows(self, pipeline, tmp_path):
        model_path = pipeline / "train" / "models" / "m1.json"
        features = pipeline / "features" / "features.csv"
        X = read_features(features)
        model = load_model(model_path)
        scores = predict(model, with_interactions(X, model.columns))
        threshold = float(np.quantile(scores, 0.7))
        argv = ["cluster", str(model_path), str(features), "--threshold", repr(threshold), "--k-max", "4"]
        assert main([*argv, "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "clusters.json").read_text(encoding="utf-8"))
        assert report["n_at_risk"] == int(np.sum(scores > threshold))
        assert len(report["labels"]) == report["n_at_risk"]
        assert sum(g["size"] for g in report["groups"]) == report["n_at_risk"]
        assert (tmp_path / "clusters_summary.csv").exists()

    def test_cluster_with_nobody_at_risk(self, pipeline, tmp_path, capsys):
        argv = [
            "cluster",
            str(pipeline / "train" / "models" / "m1.json"),
            str(pipeline / "features" / "features.csv"),
            "--threshold", "1.01",
            "--out", str(tmp_path),
        ]
        assert main(argv) == 0
        assert "empty report" in capsys.readouterr().out
        report = json.loads((tmp_path / "clusters.json").read_text(encoding="utf-8"))
        assert report["k"] is None and report["groups"] == []


class TestErrors:
    def test_empty_catalog(self, synth_dir, tmp_path, capsys):
        catalog = tmp_path / "catalog.json"
        catalog.write_text("[]", encoding="utf-8")
        argv = ["features", str(synth_dir / "spells.csv"), str(synth_dir / "persons.csv"), "--catalog", str(catalog)]
        assert main([*argv, "--out", str(tmp_path / "out")]) == 2
        assert error_report(capsys)["error"] == "ConfigError"

    def test_missing_input_file(self, synth_dir, tmp_path, capsys):
        argv = ["features", str(synth_dir / "spells.csv"), str(tmp_path / "persons.csv"), "--out", str(tmp_path)]
        assert main(argv) == 2
        document = error_report(capsys)
        assert document["error"] == "SchemaError"
        assert "persons.csv" in document["message"]

    def test_report_without_rows(self, tmp_path, capsys):
        path = tmp_path / "report.json"
        path.write_text(
            json.dumps({"seed": 1, "outcome": "any-is", "n_persons": 0, "n_train": 0, "n_holdout": 0, "rows": []}),
            encoding="utf-8",
        )
        assert main(["report", str(path)]) == 2

    def test_invalid_thread_variable(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("SPELLFORGE_THREADS", "zero")
        assert main(["synth", "--n-persons", "5", "--out", str(tmp_path)]) == 2
        assert "SPELLFORGE_THREADS" in error_report(capsys)["message"]

    def test_unknown_command(self, capsys):
        assert main(["forecast"]) == 2


def run_pipeline(root, n_persons, threads):
    cohort, features, trained = root / "cohort", root / "features", root / "train"
    common = ["--seed", "11", "--threads", str(threads)]
    assert main(["synth", "--n-persons", str(n_persons), *common, "--out", str(cohort)]) == 0
    argv = [
        "features",
        str(cohort / "spells.csv"),
        str(cohort / "persons.csv"),
        "--jobs", str(cohort / "jobs.csv"),
        "--events", str(cohort / "events.csv"),
        "--parent-links", str(cohort / "parent_links.csv"),
    ]
    assert main([*argv, "--threads", str(threads), "--out", str(features)]) == 0
    ladder = root / "ladder.json"
    ladder.write_text(json.dumps(SMALL_LADDER), encoding="utf-8")
    argv = ["train", str(features / "features.csv"), "--ladder", str(ladder), "--threads", str(threads)]
    assert main([*argv, "--seed", "5", "--out", str(trained)]) == 0
    return root


def manifest_outputs(directory):
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    return {record["path"]: record["sha256"] for record in manifest["outputs"]}


class TestReproducibility:
    def test_thread_count_does_not_change_any_output(self, tmp_path):
        one = run_pipeline(tmp_path / "one", 120, threads=1)
        two = run_pipeline(tmp_path / "two", 120, threads=2)
        for step in ("cohort", "features", "train"):
            digests = manifest_outputs(one / step)
            assert digests
            assert digests == manifest_outputs(two / step)
            for relative in digests:
                assert (one / step / relative).read_bytes() == (two / step / relative).read_bytes(), relative

    def test_point_masses_follow_the_cohort_config(self, pipeline):
        report = json.loads((pipeline / "train" / "report.json").read_text(encoding="utf-8"))
        histogram = report["histogram"]
        assert (histogram[0]["low"], histogram[0]["high"]) == (0.0, 0.0)
        assert (histogram[-1]["low"], histogram[-1]["high"]) == (1.0, 1.0)
        assert histogram[0]["share"] == pytest.approx(0.323, abs=0.02)
        assert histogram[-1]["share"] == pytest.approx(0.367, abs=0.02)

    def test_history_inputs_beat_the_heuristic_on_the_holdout(self, tmp_path):
        run = run_pipeline(tmp_path, 400, threads=1)
        report = json.loads((run / "train" / "report.json").read_text(encoding="utf-8"))
        holdout = {row["name"]: row["holdout"]["mse"] for row in report["rows"]}
        assert holdout["m2"] < holdout["m1"]
