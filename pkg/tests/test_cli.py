import json

import numpy as np
import pytest

from cutbal.catalog import CATALOG
from cutbal.cli import main
from cutbal.scenario import save_scenario
from cutbal.schedules import ClosedForm


def test_run_two_agent(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", "two-agent", "--out", str(out)]) == 0
    for name in ("trajectory.csv", "s_m.csv", "graph.txt", "report.json", "scenario.json"):
        assert (out / name).is_file()
    assert "theory violation: no" in capsys.readouterr().out
    rep = json.loads((out / "report.json").read_text())
    assert rep["partitions"]["comparison"] == "equal"
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,x_1,x_2"
    assert (out / "s_m.csv").read_text().startswith("t,S_1,S_2\n")
    assert "1 2 " in (out / "graph.txt").read_text()


def test_run_is_deterministic(tmp_path):
    cfg = tmp_path / "sc.json"
    cfg.write_text(save_scenario(CATALOG["random-markov"].scenario().with_(horizon=4.0)))
    for d in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("trajectory.csv", "s_m.csv", "graph.txt", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_example1_reports_no_K(tmp_path, capsys):
    # the sampled ratio grows like e^t and passes the cap well before T = 50
    assert main(["run", "--config", "example1", "--out", str(tmp_path / "o")]) == 0
    text = capsys.readouterr().out
    assert "no finite cut-balance K" in text
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["cut_balance"]["sampled_minimal_K"]["max"] == "inf"


def test_run_discrete(tmp_path):
    assert main(["run", "--config", "dt-random", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert rows[1].split(",")[0] == "0" and len(rows) == 62


@pytest.mark.parametrize("argv", [
    ["run", "--config", "no-such-scenario", "--out", "x"],
    ["run", "--config", "two-agent"],
    ["run", "--config", "two-agent", "--out", "x", "--k", "0.5"],
    ["bogus"],
    [],
    ["suite", "nonsense"],
])
def test_operational_errors(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1
    assert "Traceback" not in capsys.readouterr().err


def test_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"version": "1", "n": 2')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "not valid JSON" in capsys.readouterr().err
    doc = json.loads(save_scenario(CATALOG["two-agent"].scenario()))
    doc["x0"] = [0.0]
    cfg.write_text(json.dumps(doc))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_check_example1(tmp_path, capsys):
    m = tmp_path / "a.json"
    m.write_text(json.dumps(np.asarray(ClosedForm("example1").evaluate(0.0)).tolist()))
    assert main(["check", "--config", str(m)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("minimal K = 2.5\n")
    assert main(["check", "--config", str(m), "--k", "2"]) == 2
    assert "not balanced at K = 2" in capsys.readouterr().out


def test_check_one_way_and_text_format(tmp_path, capsys):
    m = tmp_path / "a.txt"
    m.write_text("# one-way\n0 0 1\n0 0 0\n0 0 0\n")
    assert main(["check", "--config", str(m)]) == 2
    assert "infeasible: cut {1} carries flow one way only" in capsys.readouterr().out
    m.write_text("0 -1\n1 0\n")
    assert main(["check", "--config", str(m)]) == 1
    m.write_text("0 1 2\n1 0\n")
    assert main(["check", "--config", str(m)]) == 1


def test_suite(capsys):
    assert main(["suite", "appendix", "--trials", "50", "--seed", "3"]) == 0
    assert "suite appendix: PASS" in capsys.readouterr().out
    assert main(["suite", "lemma1", "--trials", "0"]) == 0


def test_catalog(capsys):
    assert main(["catalog"]) == 0
    listing = capsys.readouterr().out
    assert all(name in listing for name in CATALOG)
    assert main(["catalog", "crossing"]) == 0
    assert json.loads(capsys.readouterr().out)["n"] == 3
    assert main(["catalog", "nope"]) == 1
