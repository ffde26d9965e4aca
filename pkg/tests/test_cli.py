from __future__ import annotations

import json
import os

import pytest

from gflowstate.cli import build_parser, main
from gflowstate.store import Store


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def trained_db(tmp_path, capsys):
    path = str(tmp_path / "run.db")
    code, out, _ = run_cli(
        capsys,
        [
            "train",
            "--db",
            path,
            "--height",
            "3",
            "--iterations",
            "4",
            "--batch-size",
            "2",
            "--seed",
            "0",
        ],
    )
    assert code == 0
    return path, json.loads(out)


def test_train_writes_run_and_prints_summary(trained_db):
    path, summary = trained_db
    assert summary["iterations"] == 4
    assert summary["sample_count"] == 8
    assert summary["validation_count"] == 9
    with Store.open(path) as store:
        assert store.run_config()["status"] == "complete"
        assert store.sample_count() == 8
        assert len(store.query_validation()) == 9


def test_train_no_validation_flag(tmp_path, capsys):
    path = str(tmp_path / "run.db")
    code, out, _ = run_cli(
        capsys,
        ["train", "--db", path, "--height", "3", "--iterations", "1", "--no-validation"],
    )
    assert code == 0
    assert json.loads(out)["validation_count"] == 0


def test_train_custom_validation_jsonl(tmp_path, capsys):
    records = tmp_path / "val.jsonl"
    records.write_text(
        '{"state_key": "1,0", "reward": 0.5, "features": [1.0, 0.0]}\n'
        "\n"
        '{"state_key": "2,1", "reward": 2.0, "features": [2.0, 1.0]}\n'
    )
    path = str(tmp_path / "run.db")
    code, out, _ = run_cli(
        capsys,
        [
            "train",
            "--db",
            path,
            "--height",
            "3",
            "--iterations",
            "1",
            "--validation",
            str(records),
        ],
    )
    assert code == 0
    assert json.loads(out)["validation_count"] == 2
    with Store.open(path) as store:
        rows = store.query_validation()
        assert [r.state_key for r in rows] == ["1,0", "2,1"]


def test_train_bad_validation_line_reports_error(tmp_path, capsys):
    records = tmp_path / "val.jsonl"
    records.write_text('{"state_key": "1,0", "reward": 0.5, "features": []}\nnot json\n')
    code, _, err = run_cli(
        capsys,
        ["train", "--db", str(tmp_path / "x.db"), "--height", "3", "--validation", str(records)],
    )
    assert code == 1
    assert err.startswith("error:")
    assert "line 2" in err


def test_train_refuses_to_overwrite(trained_db, capsys):
    path, _ = trained_db
    code, _, err = run_cli(capsys, ["train", "--db", path, "--height", "3"])
    assert code == 1
    assert err.startswith("error:")
    assert "overwrite" in err


def test_analyze_flow(trained_db, capsys):
    path, _ = trained_db
    code, out, _ = run_cli(capsys, ["analyze", "--db", path])
    assert code == 0
    info = json.loads(out)
    assert info["estimator"] == "exact"
    with Store.open(path) as store:
        assert all(s.log_ptx is not None for s in store.query_samples())
        assert store.load_dag_edges(*store.iteration_bounds())


def test_analyze_sampled_flags(trained_db, capsys):
    path, _ = trained_db
    code, out, _ = run_cli(
        capsys, ["analyze", "--db", path, "--estimator", "sampled", "--k", "25", "--seed", "9"]
    )
    assert code == 0
    info = json.loads(out)
    assert (info["estimator"], info["k"], info["seed"]) == ("sampled", 25, 9)


def test_analyze_missing_db_errors(tmp_path, capsys):
    code, _, err = run_cli(capsys, ["analyze", "--db", str(tmp_path / "nope.db")])
    assert code == 1
    assert err.startswith("error:")


def test_analyze_incomplete_run_errors(tmp_path, capsys):
    from gflowstate.training import TrainConfig

    from helpers import make_grid

    path = str(tmp_path / "empty.db")
    Store.create(path, make_grid(3), TrainConfig().to_json()).close()
    code, _, err = run_cli(capsys, ["analyze", "--db", path])
    assert code == 1
    assert err.startswith("error:")


def test_report_writes_artifacts(trained_db, tmp_path, capsys):
    path, _ = trained_db
    assert main(["analyze", "--db", path]) == 0
    capsys.readouterr()
    out_dir = str(tmp_path / "report")
    code, out, _ = run_cli(capsys, ["report", "--db", path, "--out", out_dir, "--n", "5"])
    assert code == 0
    written = json.loads(out)["written"]
    assert len(written) == 4
    names = sorted(os.path.basename(p) for p in written)
    assert names == ["heatmap.svg", "projection.svg", "ranking.svg", "report.json"]
    for p in written:
        assert os.path.exists(p)
    with open(os.path.join(out_dir, "report.json")) as fh:
        doc = json.load(fh)
    assert doc["range"] == [0, 3]
    assert doc["ranking"]["n"] == 5
    assert sum(b["count_samples"] for b in doc["projection"]["bins"]) == 8
    for p in written:
        if p.endswith(".svg"):
            with open(p) as fh:
                assert fh.read().startswith("<svg")


def test_db_flag_comes_from_environment(trained_db, capsys, monkeypatch):
    path, _ = trained_db
    monkeypatch.setenv("GFLOWSTATE_DB", path)
    code, out, _ = run_cli(capsys, ["analyze"])
    assert code == 0
    assert json.loads(out)["estimator"] == "exact"


def test_env_defaults_and_flag_precedence(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GFLOWSTATE_HEIGHT", "3")
    monkeypatch.setenv("GFLOWSTATE_ITERATIONS", "2")
    monkeypatch.setenv("GFLOWSTATE_NO_VALIDATION", "yes")
    path = str(tmp_path / "env.db")
    code, out, _ = run_cli(capsys, ["train", "--db", path, "--iterations", "3"])
    assert code == 0
    summary = json.loads(out)
    # The explicit flag wins over GFLOWSTATE_ITERATIONS.
    assert summary["iterations"] == 3
    assert summary["validation_count"] == 0
    with Store.open(path) as store:
        assert store.run_config()["env"]["height"] == 3


def test_serve_parser_defaults(monkeypatch):
    args = build_parser().parse_args(["serve", "--db", "x.db"])
    assert (args.host, args.port) == ("127.0.0.1", 8000)
    monkeypatch.setenv("GFLOWSTATE_PORT", "9100")
    args = build_parser().parse_args(["serve", "--db", "x.db"])
    assert args.port == 9100


def test_unknown_command_exits_via_argparse(capsys):
    with pytest.raises(SystemExit):
        main(["conjure"])
