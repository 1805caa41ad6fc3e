"""Golden-file tests for every subcommand.

Set ``UPDATE_GOLDEN=1`` to rewrite the files under tests/golden.
"""

import json
import os
import re
import subprocess
import sys
from pathlib import Path

import pytest

from tlagent.cli import main

HERE = Path(__file__).resolve().parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"

TS = re.compile(r'"timestamp": "[^"]*"')


def run(argv, capsys, tmp_path=None):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    out = TS.sub('"timestamp": ""', out)
    if tmp_path is not None:
        out = out.replace(str(tmp_path), "<tmp>")
    return code, out, err


def check_golden(name, code, out):
    text = f"exit {code}\n{out}"
    path = GOLDEN / f"{name}.out"
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(text)
    assert path.exists(), f"missing golden {path.name}; run with UPDATE_GOLDEN=1"
    assert text == path.read_text()


def records(out):
    return [json.loads(line) for line in out.splitlines()]


CASES = {
    "parse": ["parse", "--spec", "G (door_open -> F[0,5] !door_open)"],
    "compile": ["compile", "--spec", "p U q"],
    "compile_export": ["compile", "--spec", "F p", "--export-dfa"],
    "score": ["score", "--spec", "F p", "--trace", DATA / "one_frame.json"],
    "search": ["search", "--spec", "F (person & package)", "--trace", DATA / "door.json"],
    "search_prob": ["search", "--spec", "F (person & package)", "--trace", DATA / "door.json",
                    "--mode", "prob", "--rho", "0.9"],
    "monitor": ["monitor", "--spec", "F (person & package)", "--input", DATA / "door.stream.jsonl",
                "--suppression", "none"],
    "monitor_rules": ["monitor", "--rules", DATA / "door.rules.json", "--input",
                      DATA / "door.stream.jsonl", "--dry-run", "--video-id", "door"],
    "agent": ["agent", "--rules", DATA / "door.rules.json", "--trace", DATA / "door.json"],
    "agent_dry": ["agent", "--rules", DATA / "door.rules.json", "--trace", DATA / "door.json",
                  "--dry-run"],
    "eval_search": ["eval", "search", "--pred", DATA / "door.pred.json", "--gt",
                    DATA / "door.annotation.json", "--trace", DATA / "door.json"],
    "eval_fidelity": ["eval", "fidelity", "--spec", "F p", "--trace", DATA / "one_frame.json"],
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name, capsys):
    code, out, _ = run(CASES[name], capsys)
    assert code == 0
    check_golden(name, code, out)


def test_score_value(capsys):
    _, out, _ = run(CASES["score"], capsys)
    (rec,) = records(out)
    assert rec["probability"] == pytest.approx(0.8, abs=1e-12)


def test_eval_search_identical_spans(capsys):
    _, out, err = run(CASES["eval_search"], capsys)
    assert records(out)[0]["frame"]["f1"] == 1.0
    assert "frame.f1" in err


def test_eval_tools(tmp_path, capsys):
    log = tmp_path / "log.jsonl"
    assert run(["agent", "--rules", DATA / "door.rules.json", "--trace", DATA / "door.json",
                "--log", log], capsys)[0] == 0
    code, out, _ = run(["eval", "tools", "--log", log, "--gt", DATA / "door.annotation.json",
                        "--rules", DATA / "door.rules.json", "--tol", "0", "5"], capsys)
    assert code == 0
    check_golden("eval_tools", code, out)
    per_video = [r for r in records(out) if not r.get("aggregate")]
    assert [(r["selection"], r["arguments"], r["alignment"]) for r in per_video] == [(1.0, 1.0, 1.0)] * 2


def test_synth(tmp_path, capsys):
    argv = ["synth", "--scenario", DATA / "small.scenario.json", "--seed", "7",
            "--out-trace", tmp_path / "t.json", "--out-annotation", tmp_path / "a.json"]
    code, out, _ = run(argv, capsys, tmp_path)
    check_golden("synth", code, out)
    first = (tmp_path / "t.json").read_bytes()
    run(argv, capsys)
    assert (tmp_path / "t.json").read_bytes() == first
    code, _, err = run(argv[:3] + argv[5:], capsys)
    assert code == 2 and "--seed" in err


def test_pipeline(tmp_path, capsys):
    code, out, _ = run(["pipeline", "--config", DATA / "small.pipeline.json", "--output-dir", tmp_path],
                       capsys, tmp_path)
    check_golden("pipeline", code, out)
    assert (tmp_path / "summary.json").exists()


def test_syntax_error_exit_2(capsys):
    code, out, err = run(["parse", "--spec", "F ("], capsys)
    assert code == 2 and out == ""
    assert "position 3" in err and "\n     ^" in err


def test_usage_errors_exit_2(capsys):
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["search", "--spec", "F p", "--trace", "x", "--bogus"], capsys)[0] == 2
    assert run(["search", "--spec", "F p", "--trace", "x", "--tau", "2"], capsys)[0] == 2
    assert run(["monitor"], capsys)[0] == 2
    assert run(["pipeline", "--config", DATA / "bad.pipeline.json"], capsys)[2].count("rules") == 1


def test_domain_errors_exit_1(tmp_path, capsys):
    code, out, err = run(["score", "--spec", "F p", "--trace", tmp_path / "missing.json"], capsys)
    assert code == 1 and out == "" and err.startswith("trace-io:")
    code, _, err = run(["score", "--spec", "F zz", "--trace", DATA / "one_frame.json"], capsys)
    assert code == 1 and err.startswith("prob-verify:")
    bad = tmp_path / "rules.json"
    bad.write_text(json.dumps({"tools": [], "rules": [{"id": "r", "spec": "F p", "tool": "t"}]}))
    code, _, err = run(["agent", "--rules", bad, "--trace", DATA / "door.json"], capsys)
    assert code == 1 and err.startswith("agent-runtime:") and "unknown tool" in err


def test_entry_point_process():
    proc = subprocess.run([sys.executable, "-m", "tlagent.cli", "parse", "--spec", "p U q"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["formula"] == "p U q"
