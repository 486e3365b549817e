import csv
import io
import json
from contextlib import redirect_stdout

import jsonschema
import numpy as np
import pytest

from conftest import NETWORKS
from toricnet.cli import main

REPORT_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "required": ["command", "inputs", "results", "diagnostics"],
            "properties": {
                "command": {"enum": ["info", "check", "eq", "embed", "simulate", "probe"]},
                "inputs": {"type": "object"},
                "results": {"type": "object"},
                "diagnostics": {"type": "object"},
            },
        },
        {
            "required": ["command", "error"],
            "properties": {
                "error": {
                    "type": "object",
                    "required": ["type", "message"],
                }
            },
        },
    ],
}


def run(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main([str(a) for a in argv])
    text = buf.getvalue()
    report = json.loads(text)
    jsonschema.validate(report, REPORT_SCHEMA)
    return code, report, text


SEGRE = NETWORKS / "segre.crn"
AB = NETWORKS / "ab.crn"
CYCLE = NETWORKS / "3cycle.crn"
IRREV = NETWORKS / "irrev.crn"
MIXED = NETWORKS / "mixed.crn"


def test_info_segre():
    code, rep, _ = run("info", SEGRE)
    r = rep["results"]
    assert code == 0
    assert (r["n"], r["m"], r["n_edges"], r["n_components"], r["s"], r["flux_dim"]) == (2, 4, 4, 2, 1, 2)
    assert r["weakly_reversible"] is True


def test_info_pair_and_irreversible():
    r = run("info", AB)[1]["results"]
    assert (r["n"], r["m"], r["n_edges"], r["n_components"], r["s"], r["flux_dim"]) == (2, 2, 2, 1, 1, 1)
    assert run("info", IRREV)[1]["results"]["weakly_reversible"] is False


def test_info_parse_error(tmp_path):
    bad = tmp_path / "bad.crn"
    bad.write_text("species A\nA -> Q : 1\n")
    code, rep, _ = run("info", bad)
    assert code == 1
    assert rep["error"]["type"] == "ParseError"
    assert (rep["error"]["line"], rep["error"]["column"]) == (2, 6)


def test_check_exit_codes():
    code, rep, _ = run("check", SEGRE, "--rates", "2,3,4,6")
    assert code == 0 and rep["results"]["member"] is True
    assert rep["diagnostics"]["tol"] == 1e-9
    code, rep, _ = run("check", SEGRE, "--rates", "2,3,4,5")
    assert code == 2 and rep["results"]["member"] is False
    code, rep, _ = run("check", AB, "--rates", "7,11")
    assert code == 0 and rep["results"]["member"] is True
    code, rep, _ = run("check", IRREV)
    assert code == 1 and rep["error"]["type"] == "NotWeaklyReversible"


def test_check_named_rates():
    code, rep, _ = run("check", MIXED, "--set", "kf=1.5", "--set", "kr=0.5")
    assert code == 0 and rep["results"]["rates"][-2:] == [1.5, 0.5]
    code, rep, _ = run("check", MIXED, "--rates", "kf=2,kr=3")
    assert code == 0 and rep["results"]["rates"][-2:] == [2.0, 3.0]
    code, rep, _ = run("check", MIXED)
    assert code == 1


def test_eq_examples():
    code, rep, _ = run("eq", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1")
    assert code == 0
    np.testing.assert_allclose(rep["results"]["x_star"], [1.2, 0.8])
    assert rep["results"]["complex_balance_residual"] <= 1e-8
    code, rep, _ = run("eq", CYCLE, "--rates", "1,2,3", "--x0", "1,1,1")
    xs = rep["results"]["x_star"]
    np.testing.assert_allclose(xs, np.array([18, 9, 6]) / 11)
    x0 = ",".join(repr(v) for v in xs)
    rep2 = run("eq", CYCLE, "--rates", "1,2,3", "--x0", x0)[1]
    np.testing.assert_allclose(rep2["results"]["x_star"], xs, rtol=1e-14)
    code, rep, _ = run("eq", SEGRE, "--rates", "2,3,4,5", "--x0", "1,1")
    assert code == 2 and rep["error"]["type"] == "NotInToricLocus"


def test_embed_examples(monkeypatch):
    code, rep, _ = run("embed", SEGRE, "--x", "1,1", "--beta", "1,1,1,1")
    r = rep["results"]
    assert code == 0
    assert r["k"] == [1.0, 1.0, 1.0, 1.0]
    assert (r["rank"], r["expected_rank"], r["rank_pass"]) == (3, 3, True)
    assert r["jacobian_fd_max_rel_error"] <= rep["diagnostics"]["jacobian_tol"]
    code, rep, text = run("embed", SEGRE, "--x", "1,1", "--sample-seed", "42")
    assert code == 0 and rep["results"]["rank_pass"] and rep["results"]["member"]
    assert run("embed", SEGRE, "--x", "1,1", "--sample-seed", "42")[2] == text
    monkeypatch.setenv("TORICNET_SEED", "42")
    assert run("embed", SEGRE, "--x", "1,1")[1]["results"]["beta"] == rep["results"]["beta"]
    code, rep, _ = run("embed", SEGRE, "--x", "1,1", "--beta", "1,2,1,1")
    assert code == 1 and rep["error"]["type"] == "UnbalancedFlux"


def test_embed_rank_samples_parallel_deterministic():
    args = ("embed", MIXED, "--x", "1,2,1,1", "--sample-seed", "3", "--rank-samples", "16")
    serial = run(*args, "--jobs", "1")[1]["results"]
    parallel = run(*args, "--jobs", "4")[1]["results"]
    assert serial == parallel
    assert serial["rank_samples_passed"] == 16


def test_simulate(tmp_path):
    out = tmp_path / "t.csv"
    code, rep, _ = run("simulate", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1", "--t-end", "50", "--out", out)
    assert code == 0 and rep["results"]["final_distance"] < 1e-6
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2"] and len(rows) == rep["results"]["accepted_steps"] + 2
    code, rep, _ = run("simulate", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1", "--t-end", "0", "--out", out)
    assert rep["results"]["final_distance"] == pytest.approx(np.hypot(0.2, 0.2))
    assert len(open(out).read().splitlines()) == 2
    code, rep, _ = run("simulate", SEGRE, "--rates", "2,3,4,5", "--x0", "1,1", "--t-end", "5")
    assert code == 0 and "x_star" not in rep["results"] and "not in the toric locus" in rep["results"]["note"]


def test_probe():
    code, rep, _ = run("probe", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1", "--direction", "1,1")
    assert code == 0
    np.testing.assert_allclose(rep["results"]["estimates"][-1], [1.2, 0.8], rtol=1e-8)
    rep = run("probe", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1", "--direction", "0,0")[1]
    assert np.all(np.array(rep["results"]["estimates"]) == 0)
    rep = run("probe", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1", "--kind", "rates",
              "--direction", "1,0,0,0", "--jobs", "3")[1]
    assert all(3.5 <= r <= 4.5 for r in rep["results"]["richardson_ratios"])
    code, rep, _ = run("probe", SEGRE, "--rates", "2,3,4,6", "--x0", "1,1", "--kind", "rates",
                       "--direction", "1,0,0,0", "--no-project")
    assert code == 2 and rep["error"]["type"] == "NotInToricLocus"


def test_identical_inputs_identical_reports():
    args = ("eq", MIXED, "--set", "kf=1.5", "--set", "kr=0.5", "--x0", "1,2,3,4")
    assert run(*args)[2] == run(*args)[2]
