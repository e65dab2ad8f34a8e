import json
import os

import pytest

from chirpmap.errors import DataError, UsageError
from chirpmap.pipeline import (
    PipelineConfig,
    artifact_paths,
    config_from_dict,
    run_pipeline,
    run_stage,
)
from chirpmap.synth import generate_records, write_records_csv

TINY = {
    "subsample": None,
    "tsne": {"perplexity": 8, "n_iterations": 150, "momentum_switch_iter": 50,
             "exaggeration_until_iter": 50},
    "k_folds": 3,
    "classifier_configs": {"rf": {"n_trees": 10}},
    "sensitivity": {"n_trees": 10},
    "grid_resolution": 40,
    "seed": 77,
}


def write_dataset(directory) -> str:
    path = os.path.join(directory, "data.csv")
    write_records_csv(generate_records(n_per_cluster=15, seed=4), path)
    return path


def tiny_config(data_path, out_dir) -> PipelineConfig:
    return config_from_dict({**TINY, "input": data_path, "out": str(out_dir)})


def read_tree(root):
    """Relative path -> bytes for every file under root."""
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            full = os.path.join(base, name)
            with open(full, "rb") as handle:
                out[os.path.relpath(full, root)] = handle.read()
    return out


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    data = write_dataset(str(root))
    config = tiny_config(data, root / "out")
    run_pipeline(config)
    return root, data, config


EXPECTED_FILES = [
    "features.csv", "ingest_meta.json", "rejections.txt",
    "embedding.csv", "embedding_meta.json", "eval_report.json",
    "sensitivity.csv", "sensitivity_meta.json",
]


def test_all_artifacts_emitted(tiny_run):
    root, _, config = tiny_run
    out = root / "out"
    for name in EXPECTED_FILES:
        assert (out / name).exists(), name
    for scenario in ("s1", "s2", "s3"):
        for short in ("rf", "svm", "logreg", "knn"):
            assert (out / "models" / f"{scenario}_{short}.json").exists()
            assert (out / "figs" / f"fig_boundary_{scenario}_{short}.svg").exists()
        assert (out / "figs" / f"fig_confusion_{scenario}.svg").exists()
        assert (out / "figs" / f"fig_metrics_{scenario}.svg").exists()
    for name in ("fig_bars_outcome", "fig_bars_difficulty",
                 "fig_embedding_outcome", "fig_embedding_difficulty"):
        assert (out / "figs" / f"{name}.svg").exists()
    for feature in ("temporal_duration", "frequency_onset", "spectral_duration"):
        assert (out / "figs" / f"fig_sensitivity_{feature}.svg").exists()
    assert not (out / "FAILED").exists()


def test_rerun_is_byte_identical(tiny_run, tmp_path):
    root, data, config = tiny_run
    repeat = tiny_config(data, tmp_path / "out")
    run_pipeline(repeat)
    assert read_tree(root / "out") == read_tree(tmp_path / "out")


def test_stagewise_equals_single_shot(tiny_run, tmp_path):
    root, data, _ = tiny_run
    config = tiny_config(data, tmp_path / "out")
    for stage in ("ingest", "embed", "eval", "explain", "render"):
        run_stage(stage, config)
    assert read_tree(root / "out") == read_tree(tmp_path / "out")


def test_provenance_threads_through_artifacts(tiny_run):
    root, _, config = tiny_run
    out = root / "out"
    expected = config.hash()
    for name in ("ingest_meta.json", "embedding_meta.json",
                 "eval_report.json", "sensitivity_meta.json"):
        doc = json.loads((out / name).read_text())
        assert doc["config_hash"] == expected, name
        assert doc["master_seed"] == 77, name
    model = json.loads((out / "models" / "s1_rf.json").read_text())
    assert model["provenance"] == {"config": expected, "seed": 77}
    svg = (out / "figs" / "fig_bars_outcome.svg").read_text()
    assert f"config={expected} seed=77" in svg
    assert (out / "rejections.txt").read_text().startswith(f"# config={expected} seed=77")


def test_eval_report_structure(tiny_run):
    root, _, _ = tiny_run
    report = json.loads((root / "out" / "eval_report.json").read_text())
    assert set(report["scenarios"]) == {"s1", "s2", "s3"}
    assert report["classifier_configs"]["random_forest"]["n_trees"] == 10
    for entry in report["scenarios"].values():
        assert set(entry["classifiers"]) == {
            "random_forest", "svm", "logistic_regression", "knn"
        }
        for stats in entry["classifiers"].values():
            assert 0.0 <= stats["cv_accuracy_mean"] <= 1.0
            assert {"accuracy", "precision", "recall", "f1", "confusion"} <= set(stats["holdout"])


def test_hash_ignores_locations_but_not_semantics():
    base = config_from_dict({**TINY, "input": "a.csv", "out": "x"})
    moved = config_from_dict({**TINY, "input": "b.csv", "out": "y"})
    assert base.hash() == moved.hash()
    reweighted = config_from_dict({**TINY, "weights": [2, 1, 1]})
    assert reweighted.hash() != base.hash()


def test_unknown_config_keys_rejected():
    with pytest.raises(UsageError, match="unknown config keys"):
        config_from_dict({"grid": 3})
    with pytest.raises(UsageError, match="tsne"):
        config_from_dict({"tsne": {"iterations": 5}})
    with pytest.raises(UsageError, match="classifier"):
        config_from_dict({"classifier_configs": {"boost": {}}})
    with pytest.raises(UsageError):
        config_from_dict({"classifier_configs": {"rf": {"depth": 1}}})
    with pytest.raises(UsageError):
        config_from_dict({"weights": [1, 2]})
    with pytest.raises(UsageError):
        config_from_dict({"scenarios": ["s9"]})
    with pytest.raises(UsageError):
        config_from_dict({"holdout_fraction": 1.2})


def test_scenario_and_classifier_normalization():
    config = config_from_dict({"scenarios": "s2", "classifiers": ["rf", "knn"]})
    assert config.scenarios == ("s2",)
    assert config.classifiers == ("random_forest", "knn")
    assert config_from_dict({"classifiers": "all"}).classifiers == (
        "random_forest", "svm", "logistic_regression", "knn"
    )


def test_missing_upstream_artifacts_fail_with_marker(tmp_path):
    config = config_from_dict({**TINY, "out": str(tmp_path / "fresh")})
    with pytest.raises(DataError, match="features"):
        run_stage("embed", config)
    marker = tmp_path / "fresh" / "FAILED"
    assert marker.exists()
    assert "stage: embed" in marker.read_text()


def test_missing_embedding_artifact_names_itself(tmp_path, tiny_run):
    root, data, _ = tiny_run
    config = tiny_config(data, tmp_path / "out")
    run_stage("ingest", config)
    with pytest.raises(DataError, match="missing embedding artifact"):
        run_stage("eval", config)
    with pytest.raises(DataError, match="missing embedding artifact"):
        run_stage("explain", config)


def test_failed_marker_cleared_on_success(tmp_path, tiny_run):
    _, data, _ = tiny_run
    config = tiny_config(data, tmp_path / "out")
    with pytest.raises(DataError):
        run_stage("embed", config)
    assert (tmp_path / "out" / "FAILED").exists()
    run_stage("ingest", config)
    assert not (tmp_path / "out" / "FAILED").exists()


def test_subsample_limits_rows(tmp_path):
    data = write_dataset(str(tmp_path))
    config = config_from_dict({**TINY, "input": data, "out": str(tmp_path / "out"),
                               "subsample": 30})
    run_stage("ingest", config)
    lines = (tmp_path / "out" / "features.csv").read_text().strip().splitlines()
    assert len(lines) == 31  # header + 30 rows
    meta = json.loads((tmp_path / "out" / "ingest_meta.json").read_text())
    assert meta["n_after_subsample"] == 30
    assert meta["n_accepted"] == 45


def test_zero_weights_error_names_the_weighting_step(tmp_path):
    data = write_dataset(str(tmp_path))
    config = config_from_dict({**TINY, "input": data, "out": str(tmp_path / "out"),
                               "weights": [0, 0, 0]})
    with pytest.raises(DataError, match="apply_weights"):
        run_stage("ingest", config)


def test_ingest_requires_input(tmp_path):
    config = config_from_dict({**TINY, "out": str(tmp_path / "out")})
    with pytest.raises(UsageError, match="input"):
        run_stage("ingest", config)


def test_artifact_paths_shape(tmp_path):
    paths = artifact_paths(str(tmp_path))
    assert paths["features"].endswith("features.csv")
    assert paths["failed"].endswith("FAILED")
