import json
import math

import pytest

from circuitdream.circuit import RY_CNOT_POOL, Circuit, GateSpec, Var, serialize_circuit
from circuitdream.datagen import DatasetRecord, save_dataset
from circuitdream.encoding import build_vocabulary
from circuitdream.cli import main
from circuitdream.neuralnet import init_model, save_checkpoint


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def error_of(err):
    return json.loads(err.strip().splitlines()[-1])


@pytest.fixture
def out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CIRCUITDREAM_OUT", str(tmp_path / "runs"))
    return tmp_path / "runs"


@pytest.mark.parametrize("n, expected", [(1, -1.0), (2, -math.sqrt(5)), (6, -7.296229810558749)])
def test_oracle(capsys, monkeypatch, n, expected):
    monkeypatch.delenv("CIRCUITDREAM_OUT", raising=False)
    code, out, _ = run(capsys, "oracle", "--n", str(n))
    assert code == 0
    assert json.loads(out)["energy"] == pytest.approx(expected, abs=1e-10)


def test_oracle_writes_manifest(capsys, out_env):
    assert run(capsys, "oracle", "--n", "3")[0] == 0
    manifest = json.loads((out_env / "oracle" / "manifest.json").read_text())
    assert manifest["command"] == "oracle" and manifest["outputs"] == ["oracle.json"]


def test_oracle_too_large(capsys, out_env):
    code, _, err = run(capsys, "oracle", "--n", "13")
    assert code == 2 and "message" in error_of(err)


def test_unknown_preset(capsys, out_env):
    code, _, err = run(capsys, "gen", "--preset", "Z_q")
    assert code == 2
    e = error_of(err)
    assert e["error"] == "unknown_preset" and "B_s" in e["message"]


def test_missing_dataset(capsys, out_env, tmp_path):
    code, _, err = run(capsys, "train", str(tmp_path / "nope.jsonl"))
    assert code == 2 and error_of(err)["error"] == "missing_file"


def test_expr_samples_below_bins(capsys, out_env):
    code, _, err = run(capsys, "expr", "--circuit", "RY=0=nop=a", "--samples", "10", "--bins", "75")
    assert code == 2 and error_of(err)["error"] == "invalid_argument"


def test_expr_mean_field(capsys, out_env):
    code, out, _ = run(capsys, "expr", "--mean-field", "relaxed", "--samples", "100", "--bins", "10")
    assert code == 0
    row = json.loads(out)
    assert row["n_params"] == 6 and row["higher_is_better"] == -row["kl_divergence"]


def tiny_dataset(path):
    gates = [(GateSpec("RY", 0, None, Var("a")),), (GateSpec("CNOT", 1, 0), GateSpec("RY", 1, None, Var("a"))),
             (GateSpec("RY", 2, None, Var("a")), GateSpec("CNOT", 2, 1)), (GateSpec("CNOT", 0, 1),)]
    records = [
        DatasetRecord(serialize_circuit(Circuit(3, g)), -1.0 - 0.1 * i, {}, {"pool": RY_CNOT_POOL.to_dict()})
        for i, g in enumerate(gates * 5)
    ]
    save_dataset(records, path)


def test_sweep_limit(capsys, out_env, tmp_path):
    tiny_dataset(tmp_path / "d.jsonl")
    code, out, _ = run(capsys, "sweep", str(tmp_path / "d.jsonl"), "--epochs", "2", "--limit", "2")
    assert code == 0 and json.loads(out)["points"] == 2
    rows = (out_env / "sweep" / "sweep.jsonl").read_text().splitlines()
    assert len(rows) == 2 and json.loads(rows[0])["label"] != json.loads(rows[1])["label"]


def test_train_then_dream_single_circuit(capsys, out_env, tmp_path):
    tiny_dataset(tmp_path / "d.jsonl")
    assert run(capsys, "train", str(tmp_path / "d.jsonl"), "--epochs", "3")[0] == 0
    ckpt = out_env / "train" / "model.ckpt"
    code, out, _ = run(capsys, "dream", str(ckpt), "--circuit", "RY=0=nop=a",
                       "--steps", "5", "--epochs", "2", "--restarts", "1")
    assert code == 0
    assert json.loads(out)["size"] == 1
    assert (out_env / "dream" / "traces" / "trace-0000.jsonl").exists()


def test_dream_vocabulary_mismatch(capsys, out_env, tmp_path):
    vocab = build_vocabulary(RY_CNOT_POOL, 3, ["a"], max_gates=4)
    save_checkpoint(init_model((vocab.size, 4, 1), 0, vocab), tmp_path / "m.ckpt")
    code, _, err = run(capsys, "dream", str(tmp_path / "m.ckpt"), "--circuit", "XY=0=1=a")
    assert code == 2 and error_of(err)["error"] == "vocabulary_mismatch"


def test_dream_missing_checkpoint(capsys, out_env, tmp_path):
    code, _, err = run(capsys, "dream", str(tmp_path / "m.ckpt"), "--circuit", "RY=0=nop=a")
    assert code == 2 and error_of(err)["error"] == "missing_file"
