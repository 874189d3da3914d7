import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from reflou import verify as V
from reflou.cli import emit_report, run
from reflou.config import config_hash, from_dict

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "seed": 11,
    "space": {"lambdas": [1.0, 0.5]},
    "domain": {"kind": "ball", "r": 1.0},
    "sim": {"dt": 0.01, "horizon": 1.0, "paths": 40, "save_paths": 3},
}


def write(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_simulate_writes_paths_and_summary(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "paths"
    assert run(["simulate", "--config", cfg, "--out", str(out)]) == 0
    csvs = sorted((out / "paths").glob("path_*.csv"))
    assert len(csvs) == 3
    lines = csvs[0].read_text().splitlines()
    assert lines[0] == "t,x_1,x_2,L,hit" and len(lines) == 102
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config_hash"] == from_dict(SMALL).hash
    assert summary["n_paths"] == 40
    assert "timestamp" not in summary
    assert "timestamp" in json.loads((out / "metadata.json").read_text())


@pytest.mark.parametrize("dt", [0.0, -0.1])
def test_bad_dt_names_the_field(tmp_path, capsys, dt):
    data = json.loads(json.dumps(SMALL))
    data["sim"]["dt"] = dt
    assert run(["simulate", "--config", write(tmp_path, data), "--out", str(tmp_path / "o")]) == 2
    assert "sim.dt" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    assert run(["simulate", "--config", write(tmp_path, {"space": {"lambdas": [1.0]}})]) == 2
    assert "seed" in capsys.readouterr().err
    assert run(["simulate", "--config", write(tmp_path, {"seed": 1, "sim": {"dtt": 1}})]) == 2
    assert "sim.dtt" in capsys.readouterr().err
    assert run(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert run(["simulate", "--config", write(tmp_path, {"seed": 1, "space": {"lambdas": [1.0, 2.0]}})]) == 2
    assert run(["simulate", "--config", write(tmp_path, SMALL), "--dt", "-1"]) == 2


def test_unknown_subcommand_prints_usage(capsys):
    assert run(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run([]) == 2


def test_verify_ibp_halfspace(tmp_path, capsys):
    out = tmp_path / "v"
    assert run(["verify", "ibp", "--config", str(CONFIGS / "halfspace1d.json"), "--out", str(out)]) == 0
    reports = [json.loads(line) for line in (out / "reports.jsonl").read_text().splitlines()]
    assert reports and all(r["estimate"] < 1e-8 for r in reports)
    assert "overall: PASS" in capsys.readouterr().out


def test_verify_none_is_usage_error(tmp_path):
    assert run(["verify", "none", "--config", str(CONFIGS / "halfspace1d.json"), "--out", str(tmp_path)]) == 2
    assert run(["verify", "bogus", "--config", str(CONFIGS / "halfspace1d.json"), "--out", str(tmp_path)]) == 2


def test_emit_report_ordering_and_exit(tmp_path):
    good = V.SummaryReport("b", 0.0, 0.0, 1e-6, 1, "h1")
    bad = V.SummaryReport("a", 1.0, 0.0, 1e-6, 1, "h1")
    assert emit_report([good], tmp_path / "one") == 0
    text = (tmp_path / "one" / "reports.txt").read_text()
    assert len(text.splitlines()) == 3 and text.endswith("overall: PASS\n")
    assert emit_report([good, bad], tmp_path / "two") == 1
    names = [json.loads(line)["name"] for line in (tmp_path / "two" / "reports.jsonl").read_text().splitlines()]
    assert names == ["a", "b"]
    assert "overall: FAIL" in (tmp_path / "two" / "reports.txt").read_text()


def test_report_merge_and_hash_guard(tmp_path):
    emit_report([V.SummaryReport("x", 0.0, 0.0, 1.0, 1, "h1")], tmp_path / "a")
    emit_report([V.SummaryReport("y", 2.0, 0.0, 1.0, 1, "h1")], tmp_path / "b")
    emit_report([V.SummaryReport("z", 0.0, 0.0, 1.0, 1, "h2")], tmp_path / "c")
    a, b, c = (str(tmp_path / s / "reports.jsonl") for s in "abc")
    assert run(["report", a, b, "--out", str(tmp_path / "m")]) == 1
    assert len((tmp_path / "m" / "merged.jsonl").read_text().splitlines()) == 2
    assert run(["report", a, c]) == 2
    assert run(["report", a, c, "--force"]) == 0


def test_unwritable_output_is_runtime_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["simulate", "--config", write(tmp_path, SMALL), "--out", str(blocker / "sub")]) == 3


def test_sample(tmp_path):
    out = tmp_path / "s"
    assert run(["sample", "--config", write(tmp_path, SMALL), "--out", str(out), "--n", "200"]) == 0
    lines = (out / "gamma_O.csv").read_text().splitlines()
    assert lines[0] == "x_1,x_2" and len(lines) == 201


def test_hash_ignores_output_section():
    a = dict(SMALL, output={"dir": "x"})
    b = dict(SMALL, output={"dir": "y"})
    assert config_hash(from_dict(a).raw) == config_hash(from_dict(b).raw)
    assert from_dict(SMALL).hash != from_dict(SMALL, {"seed": 12}).hash


def _cli_summary(tmp_path, cfg, threads):
    out = tmp_path / f"t{threads}"
    env = dict(os.environ, GR_THREADS=str(threads))
    subprocess.run(
        [sys.executable, "-m", "reflou.cli", "simulate", "--config", cfg, "--out", str(out)],
        check=True, env=env, capture_output=True,
    )
    return (out / "summary.json").read_bytes()


def test_summary_bytes_independent_of_threads(tmp_path):
    data = json.loads(json.dumps(SMALL))
    data["sim"]["paths"] = 9000
    data["sim"]["horizon"] = 0.1
    cfg = write(tmp_path, data)
    assert _cli_summary(tmp_path, cfg, 1) == _cli_summary(tmp_path, cfg, 2)
