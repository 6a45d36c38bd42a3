"""Exit codes, error lines and outputs of the command-line tool.

Run through ctest, which sets AC2C_CLI to the built binary.
"""

import json
import os
import re
import subprocess

import pytest

CLI = os.environ.get("AC2C_CLI", "")
ERROR_LINE = re.compile(r"^ERROR (usage|config|io|shape|numeric|domain|internal): \S.*$")

pytestmark = pytest.mark.skipif(not CLI, reason="AC2C_CLI not set")


def run(*args, env=None):
    return subprocess.run([CLI, *args], capture_output=True, text=True, env=env)


def tiny(tmp_path, **extra):
    cfg = {"env": "cn", "width": "8", "batch_size": "4", "updates_per_episode": "1",
           "train_episodes": "3", "eval_episodes": "2", "eval_interval": "2",
           "interval_eval_episodes": "1", "seeds": "1,2", "run_name": "tiny"}
    cfg.update(extra)
    path = tmp_path / "tiny.cfg"
    path.write_text("# tiny run\n" + "".join(f"{k} = {v}\n" for k, v in cfg.items()))
    return path


def assert_error(proc, kind, code):
    assert proc.returncode == code, proc.stderr
    lines = proc.stderr.strip().splitlines()
    assert len(lines) == 1
    assert ERROR_LINE.match(lines[0])
    assert lines[0].startswith(f"ERROR {kind}: ")


def test_no_verb_is_a_usage_error():
    assert_error(run(), "usage", 64)


def test_unknown_flag_is_a_usage_error():
    assert_error(run("train", "--bogus"), "usage", 64)


def test_bad_value_and_unknown_key(tmp_path):
    assert_error(run("train", "--gamma", "x"), "config", 2)
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert_error(run("train", "-c", str(bad)), "config", 2)


def test_missing_checkpoint_is_an_io_error():
    assert_error(run("eval", "--checkpoint", "/nonexistent/ckpt.bin"), "io", 2)


def test_train_eval_plotdata_round(tmp_path):
    env = dict(os.environ, AC2C_OUTPUT_ROOT=str(tmp_path / "out"))
    cfg = tiny(tmp_path)
    proc = run("train", "-c", str(cfg), env=env)
    assert proc.returncode == 0, proc.stderr
    runs = [json.loads(l) for l in proc.stdout.strip().splitlines()]
    assert [r["seed"] for r in runs] == [1, 2]
    for r in runs:
        assert r["dir"].startswith(str(tmp_path / "out" / "tiny"))
        manifest = json.load(open(os.path.join(r["dir"], "manifest.json")))
        assert manifest["seed"] == r["seed"]
        for line in open(os.path.join(r["dir"], "metrics.jsonl")):
            json.loads(line)

    ckpts = sum((["--checkpoint", r["checkpoint"]] for r in runs), [])
    proc = run("eval", "-c", str(cfg), *ckpts, env=env)
    assert proc.returncode == 0, proc.stderr
    agg = json.loads(proc.stdout)
    assert agg["runs"] == 2 and "mean" in agg["reward_per_step"]

    out = tmp_path / "plot.csv"
    metrics = [os.path.join(r["dir"], "metrics.jsonl") for r in runs]
    proc = run("plotdata", *metrics, "-o", str(out))
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().splitlines()[0] == "run,seed,episode,metric,value,mean,std,lower,upper"


def test_random_policy_eval_needs_no_checkpoint(tmp_path):
    proc = run("eval", "-c", str(tiny(tmp_path)), "--random-policy", "--episodes", "3")
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["runs"] == 1


def test_sweep_rejects_unknown_parameter(tmp_path):
    assert_error(run("sweep", "-c", str(tiny(tmp_path)), "--param", "gamma", "--values", "0.9"), "config", 2)


def test_threshold_outside_range_warns(tmp_path):
    proc = run("inspect-topology", "--threshold", "0.9")
    assert proc.returncode == 0
    assert any(l.startswith("WARNING config: ") for l in proc.stderr.splitlines())


def test_inspect_topology_format():
    proc = run("inspect-topology", "--env", "cn", "--n_agents", "5", "--seed", "2", "--step", "3")
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert len(lines) == 5
    pattern = re.compile(r"^agent \d+ \| one_hop:( \d+)* \| two_hop:( \d+)*$")
    assert all(pattern.match(l) for l in lines), lines
