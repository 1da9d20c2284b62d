"""CLI dispatch: exit codes, config precedence, artifact determinism."""
import json

import pytest

from coursealign.cli import dispatch

from conftest import random_table, write_catalog_files, write_embeddings_jsonl


@pytest.fixture()
def pipeline_dir(tmp_path, small_catalog):
    files = write_catalog_files(tmp_path / "data")
    table = random_table(sorted(small_catalog.courses), dim=8, seed=3)
    files["embeddings"] = write_embeddings_jsonl(tmp_path / "data" / "embeddings.jsonl", table)
    return tmp_path, files


def catalog_args(files):
    return [
        "--institutions", str(files["institutions"]),
        "--courses", str(files["courses"]),
        "--articulations", str(files["articulations"]),
    ]


def test_ingest_reports_counts(pipeline_dir, capsys):
    _, files = pipeline_dir
    code = dispatch(["ingest"] + catalog_args(files))
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["institutions"] == 3
    assert payload["courses"] == 8
    assert payload["articulations"] == 4
    assert payload["provenance"]["tool"] == "coursealign"
    assert len(payload["provenance"]["inputs"]["courses"]) == 64  # sha256 hex


def test_missing_file_is_domain_error(pipeline_dir, capsys):
    tmp_path, files = pipeline_dir
    code = dispatch([
        "ingest", "--institutions", str(tmp_path / "nope.csv"), "--courses", str(files["courses"]),
    ])
    assert code == 1
    err = capsys.readouterr().err.strip()
    payload = json.loads(err)
    assert "error" in payload and "detail" in payload


def test_usage_error_exit_code():
    assert dispatch(["ingest"]) == 2  # required flags missing
    assert dispatch(["no-such-command"]) == 2


def test_train_then_evaluate_round_trip(pipeline_dir, capsys):
    tmp_path, files = pipeline_dir
    model_path = tmp_path / "model.ssa"
    code = dispatch(
        ["train"] + catalog_args(files) + [
            "--embeddings", str(files["embeddings"]),
            "--learning-rate", "1.0", "--epochs", "5",
            "--out", str(model_path),
        ]
    )
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["epochs_run"] == 5
    assert model_path.exists()
    assert (tmp_path / "model.ssa.meta.json").exists()

    report_path = tmp_path / "eval.json"
    code = dispatch(
        ["evaluate"] + catalog_args(files) + [
            "--embeddings", str(files["embeddings"]),
            "--learning-rate", "1.0", "--epochs", "5", "--folds", "2",
            "--out", str(report_path),
        ]
    )
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["total"] + report["skipped"] == 4
    assert len(report["per_fold"]) == 2


def test_evaluate_byte_identical_reruns(pipeline_dir, capsys):
    tmp_path, files = pipeline_dir
    outputs = []
    for name in ("a.json", "b.json"):
        code = dispatch(
            ["evaluate"] + catalog_args(files) + [
                "--embeddings", str(files["embeddings"]),
                "--learning-rate", "0.5", "--epochs", "3", "--folds", "2",
                "--seed", "11", "--out", str(tmp_path / name),
            ]
        )
        assert code == 0
        outputs.append((tmp_path / name).read_bytes())
    capsys.readouterr()
    assert outputs[0] == outputs[1]


def test_config_file_supplies_defaults_flags_win(pipeline_dir, capsys):
    tmp_path, files = pipeline_dir
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"epochs": 7, "learning_rate": 0.9, "seed": 123}))
    code = dispatch(
        ["train"] + catalog_args(files) + [
            "--embeddings", str(files["embeddings"]),
            "--config", str(config_path),
            "--epochs", "2",  # explicit flag beats config
            "--out", str(tmp_path / "m.ssa"),
        ]
    )
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["epochs_run"] == 2
    assert summary["provenance"]["seed"] == 123  # config beats built-in default


def test_bad_config_file(pipeline_dir, capsys, tmp_path):
    _, files = pipeline_dir
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert dispatch(["ingest"] + catalog_args(files) + ["--config", str(bad)]) == 1
    assert "config" in capsys.readouterr().err


def test_project_subcommand(capsys):
    code = dispatch([
        "project", "--candidates", "2787526", "--rate", "0.6123", "--existing", "156968",
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["expected_accepted"] == 1706802
    assert payload["fold_increase"] == pytest.approx(11.87, abs=0.01)
    assert payload["ratio_vs_existing"] == pytest.approx(17.759, abs=0.001)


def test_table_format_renders_text(capsys):
    code = dispatch([
        "project", "--candidates", "100", "--rate", "0.5", "--existing", "100",
        "--format", "table",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "expected_accepted" in out
    with pytest.raises(json.JSONDecodeError):
        json.loads(out)


def test_synth_threshold_expand_chain(tmp_path, capsys):
    data_dir = tmp_path / "bench"
    assert dispatch([
        "synth", "--out-dir", str(data_dir),
        "--n-institutions", "3", "--courses-per-institution", "20",
        "--classes", "20", "--dim", "8", "--seed", "5",
    ]) == 0
    capsys.readouterr()
    args = [
        "--institutions", str(data_dir / "institutions.csv"),
        "--courses", str(data_dir / "courses.csv"),
        "--articulations", str(data_dir / "articulations.csv"),
        "--embeddings", str(data_dir / "embeddings.jsonl"),
    ]
    model_path = tmp_path / "m.ssa"
    assert dispatch(
        ["train"] + args + ["--learning-rate", "1.0", "--epochs", "60", "--out", str(model_path)]
    ) == 0
    capsys.readouterr()

    threshold_path = tmp_path / "threshold.json"
    assert dispatch(
        ["threshold"] + args + ["--model", str(model_path), "--out", str(threshold_path)]
    ) == 0
    capsys.readouterr()
    report = json.loads(threshold_path.read_text())
    assert 0.0 < report["auc"] <= 1.0
    assert "best_threshold" in report

    expansions_path = tmp_path / "expansions.csv"
    assert dispatch(
        ["expand"] + args + [
            "--model", str(model_path),
            "--report", str(threshold_path),
            "--out", str(expansions_path),
        ]
    ) == 0
    summary = json.loads(capsys.readouterr().out)
    lines = expansions_path.read_text().strip().splitlines()
    assert lines[0] == "source_course_id,target_course_id,cosine"
    assert summary["new_pairs"] == len(lines) - 1
