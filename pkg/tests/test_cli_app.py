import json

import pytest

import app
from cli import commands
from cli.manifest import MANIFEST
from cli.settings import RUN_LOG
from numcore.errors import DivergenceError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("LOOKUP_LAB_OUT", "LOOKUP_LAB_WORKERS", "LOOKUP_LAB_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != RUN_LOG}


def test_gen_data_twice_is_identical(tmp_path):
    assert app.main(["gen-data", "--seed", "1", "--out", str(tmp_path / "a")]) == 0
    assert app.main(["gen-data", "--seed", "1", "--out", str(tmp_path / "b")]) == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b
    assert "train.tsv" in a and MANIFEST in a
    manifest = json.loads(a[MANIFEST])
    assert manifest["command"] == "gen-data"
    assert set(manifest["artifacts"]) == {name for name in a if name != MANIFEST}


def test_gen_data_without_atomic(tmp_path, capsys):
    assert app.main(["gen-data", "--no-atomic", "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["train"] == 168


def test_missing_checkpoint_is_validation_error(tmp_path):
    code = app.main(["eval", "--checkpoint", str(tmp_path / "nowhere" / "model.json")])
    assert code == app.EXIT_VALIDATION


def test_unknown_split_is_validation_error(checkpoints):
    assert app.main(["eval", "--checkpoint", str(checkpoints[0]), "--split", "XY"]) == app.EXIT_VALIDATION


def test_malformed_dataset_is_validation_error(tmp_path):
    data = tmp_path / "data"
    assert app.main(["gen-data", "--out", str(data)]) == 0
    (data / "train.tsv").write_text("000 t1\n")
    code = app.main(["eval", "--checkpoint", str(tmp_path), "--data", str(data)])
    assert code == app.EXIT_VALIDATION


def test_divergence_exits_with_numerical_code(monkeypatch, tmp_path):
    def diverge(*args, **kwargs):
        raise DivergenceError("loss became nan", epoch=1, index=0)

    monkeypatch.setattr(commands, "train", diverge)
    code = app.main(["train", "--mode", "ag", "--hidden", "4", "--out", str(tmp_path / "run")])
    assert code == app.EXIT_NUMERICAL
    assert "loss became nan" in (tmp_path / "run" / RUN_LOG).read_text()


def test_untrained_model_scores_near_zero(checkpoints, tmp_path):
    out = tmp_path / "eval"
    assert app.main(["eval", "--checkpoint", str(checkpoints[1].parent), "--out", str(out)]) == 0
    accuracies = json.loads((out / "eval.json").read_text())
    assert set(accuracies) == {"HI", "HC", "HT", "NC"}
    assert all(v <= 0.1 for v in accuracies.values())


def test_train_then_analyze(tmp_path):
    run = tmp_path / "ag0"
    assert app.main(["train", "--mode", "ag", "--seed", "0", "--hidden", "4", "--epochs", "1",
                     "--out", str(run)]) == 0
    for name in ("model.json", "model.bin", "history.json", "eval.json", MANIFEST, RUN_LOG):
        assert (run / name).exists()
    history = json.loads((run / "history.json").read_text())
    assert len(history["epochs"]) == 1

    out = tmp_path / "analysis"
    code = app.main(["analyze", "--checkpoint", str(run), "--what", "heatmap", "graph", "polarity",
                     "--no-svg", "--out", str(out)])
    assert code == 0
    assert (out / "heatmap_decoder_gru_W_hh.csv").exists()
    assert (out / "graph_encoder_gru_W_hz.dot").exists()
    assert (out / "graph_decoder_gru_W_iz.dot").exists()
    polarity = json.loads((out / "polarity.json").read_text())
    assert set(polarity) == {"encoder", "decoder"}


def test_analyze_needs_inputs(tmp_path):
    assert app.main(["analyze", "--what", "heatmap", "--out", str(tmp_path)]) == app.EXIT_VALIDATION
