import csv
import io
import json

import pytest

from seeddistill import cli
from seeddistill.persist import load_model


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = cli.main(["synth", "--out-dir", str(out), "--n-segments", "300", "--vocab-size", "300", "--dim", "8", "--p-seed", "0.8"])
    assert code == 0
    return out


def _common(files):
    return ["--corpus", str(files / "corpus.jsonl"), "--lexicon", str(files / "lexicon.json"), "--embeddings", str(files / "embeddings.txt"), "--epochs", "3"]


def test_cotrain_logs_one_line_per_round(files, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert cli.main(["cotrain", *_common(files), "--out", str(model), "--max-rounds", "3"]) == 0
    lines = (tmp_path / "m.json.rounds.jsonl").read_text().splitlines()
    bundle = load_model(model)
    assert len(lines) == len(bundle.rounds) >= 1
    assert [json.loads(line)["round"] for line in lines] == list(range(len(lines)))
    assert capsys.readouterr().out.splitlines() == lines
    manifest = json.loads((tmp_path / "m.json.manifest.json").read_text())
    assert manifest["command"] == "cotrain" and manifest["rng_seed"] == 1
    assert set(manifest["inputs"]["corpus"]) == {"path", "sha256"}


def test_train_then_predict(files, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert cli.main(["train", *_common(files), "--out", str(model)]) == 0
    assert len(load_model(model).rounds) == 1
    capsys.readouterr()
    pred = tmp_path / "p.csv"
    assert cli.main(["predict", "--model", str(model), "--corpus", str(files / "corpus.jsonl"), "--who", "teacher", "--out", str(pred)]) == 0
    rows = list(csv.DictReader(pred.open()))
    assert len(rows) == 300
    assert all(r["p_vector"] == "" and r["q_vector"] for r in rows)
    assert cli.main(["predict", "--model", str(model), "--corpus", str(files / "corpus.jsonl")]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 300
    assert all(r["p_vector"] and r["q_vector"] for r in rows)


def test_eval_reruns_seeds(files, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert cli.main(["train", *_common(files), "--out", str(model)]) == 0
    capsys.readouterr()
    assert cli.main(["eval", "--model", str(model), "--test", str(files / "corpus.jsonl"), "--runs", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n_runs"] == 5 and len(report["run_f1"]) == 5
    assert cli.main(["eval", "--model", str(model), "--test", str(files / "corpus.jsonl")]) == 0
    assert json.loads(capsys.readouterr().out)["n_runs"] == 1


def test_eval_from_raw_inputs(files, tmp_path):
    out = tmp_path / "r.json"
    args = ["eval", *_common(files), "--test", str(files / "corpus.jsonl"), "--runs", "2", "--ablation", "hard_targets", "--out", str(out)]
    assert cli.main(args) == 0
    assert json.loads(out.read_text())["ablation"] == "hard_targets"


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_parse_error_exit_code(files, tmp_path, capsys):
    bad = tmp_path / "lex.json"
    bad.write_text("{nope")
    args = ["train", "--corpus", str(files / "corpus.jsonl"), "--lexicon", str(bad), "--embeddings", str(files / "embeddings.txt"), "--out", str(tmp_path / "m")]
    assert cli.main(args) == 2
    assert _error(capsys)["error"] == "ParseError"


def test_validation_exit_codes(files, tmp_path, capsys):
    assert cli.main(["train", "--corpus", str(files / "corpus.jsonl")]) == 3
    assert _error(capsys)["exit_code"] == 3
    dup = tmp_path / "lex.json"
    dup.write_text('{"A": ["x"], "B": ["x"], "General": []}')
    args = ["train", "--corpus", str(files / "corpus.jsonl"), "--lexicon", str(dup), "--embeddings", str(files / "embeddings.txt"), "--out", str(tmp_path / "m")]
    assert cli.main(args) == 3
    assert _error(capsys)["error"] == "DuplicateSeed"
    assert cli.main(["predict", "--model", str(tmp_path / "missing.json"), "--corpus", "x"]) == 3


def test_runtime_error_exit_code(files, tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "run_iswd", boom)
    assert cli.main(["train", *_common(files), "--out", str(tmp_path / "m")]) == 4
    assert _error(capsys) == {"error": "RuntimeError", "message": "disk on fire", "exit_code": 4}
