import json

import pytest

from apmdm.cli import dispatch, sha256
from apmdm.tasks import parity
from apmdm.tasks.common import read_jsonl


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def _manifest(path):
    return json.loads(open(path).read())


def test_gen_data_writes_episodes_and_manifest(tmp_path):
    assert dispatch(["gen-data", "--task", "parity", "--n", "4", "--out", "d/par.jsonl"]) == 0
    trs = read_jsonl("d/par.jsonl", parity.VOCAB)
    assert len(trs) == 4 and all(t.replay_ok() for t in trs)
    man = _manifest("d/par.jsonl.manifest.json")
    assert man["exit_code"] == 0 and man["seed"] == 0
    assert man["hashes"]["d/par.jsonl"] == sha256("d/par.jsonl")
    assert man["wall_clock"] >= 0


def test_gen_data_seed_reproducible():
    dispatch(["gen-data", "--task", "graph", "--n", "3", "--seed", "5", "--out", "a.jsonl"])
    dispatch(["gen-data", "--task", "graph", "--n", "3", "--seed", "5", "--out", "b.jsonl"])
    assert sha256("a.jsonl") == sha256("b.jsonl")


def test_usage_errors_exit_1():
    assert dispatch(["gen-data", "--task", "parity"]) == 1
    assert dispatch(["eval", "--task", "parity", "--thresholds", "0.5,0.5"]) == 1
    assert dispatch(["eval", "--task", "nosuch"]) == 1
    man = _manifest("apmdm-eval.manifest.json")
    assert man["exit_code"] == 1


def test_missing_checkpoint_exit_1():
    assert dispatch(["eval", "--task", "parity", "--ckpt", "nope.npz", "--out", "e"]) == 1
    assert _manifest("e/manifest.json")["exit_code"] == 1


def test_oracle_eval_summary(tmp_path):
    assert dispatch(["eval", "--task", "parity", "--length", "6", "--n", "20", "--out", "ev"]) == 0
    res = json.loads(open("ev/eval-metrics.json").read())
    row = res["rows"][0]
    assert res["pass"] and res["mode"] == "oracle"
    assert {"size", "solved", "total", "accuracy", "mean_steps"} <= set(row)
    assert row["accuracy"] == 1.0 and (tmp_path / "ev" / "eval-metrics.txt").exists()


def test_failing_threshold_exit_2():
    assert dispatch(["train", "--task", "parity", "--steps", "1", "--out", "m"]) == 0
    code = dispatch(["eval", "--task", "parity", "--ckpt", "m/model.npz", "--length", "8",
                     "--n", "30", "--min-accuracy", "0.999", "--out", "ev"])
    res = json.loads(open("ev/eval-metrics.json").read())
    assert res["mode"] == "trained"
    assert code == (0 if res["pass"] else 2)
    assert not res["pass"]


def test_config_file_defaults_and_flags_win():
    open("c.json", "w").write(json.dumps({"n": 2, "seed": 9}))
    dispatch(["gen-data", "--task", "parity", "--config", "c.json", "--seed", "1", "--out", "x.jsonl"])
    man = _manifest("x.jsonl.manifest.json")
    assert man["config"]["n"] == 2 and man["seed"] == 1


def test_unknown_config_key():
    open("c.json", "w").write(json.dumps({"bogus": 1}))
    assert dispatch(["gen-data", "--task", "parity", "--config", "c.json", "--out", "x.jsonl"]) == 1


@pytest.mark.parametrize("variant", ["ao", "rewrite"])
def test_verify_sim(variant):
    assert dispatch(["verify-sim", "--program", "countdown", "--variant", variant, "--out", "vs"]) == 0
    res = json.loads(open("vs/verify-sim-metrics.json").read())
    assert res["match"] is True


def test_run_pram_and_dyck(tmp_path):
    assert dispatch(["run-pram", "--program", "treesum16", "--out", "rp"]) == 0
    assert dispatch(["dyck-sample", "--n", "5", "--out", "dy"]) == 0


def test_decode_single_input():
    assert dispatch(["decode", "--task", "parity", "--input", "1011", "--out", "dc"]) == 0
    recs = [json.loads(line) for line in open("dc")]
    assert [r["step"] for r in recs] == list(range(len(recs)))
    assert recs[-1]["stop_reason"] == "fixpoint"
    assert recs[0]["x"][:5] == ["BOS", "1", "0", "1", "1"]
    assert _manifest("dc.manifest.json")["exit_code"] == 0
