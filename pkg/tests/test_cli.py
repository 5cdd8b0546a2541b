import json
from pathlib import Path

import pytest

from swarmplan.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_run_mini_plant_writes_artifacts(tmp_path, capsys):
    rc = main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
               "--seed", "5", "--out", str(tmp_path)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert out["tasks_completed"] == 7
    for name in ("run_log.jsonl", "metrics.json", "gantt_tasks.csv",
                 "gantt_subtasks.csv", "automata.json", "task_dag.dot",
                 "timings.json", "recorded_interventions.jsonl"):
        assert (tmp_path / name).exists(), name
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["tasks_total"] == 7
    dag = (tmp_path / "task_dag.dot").read_text()
    assert '"tp_1" -> ' in dag


def test_run_verify_replays_clean(tmp_path, capsys):
    rc = main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
               "--seed", "1", "--out", str(tmp_path), "--verify"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert out["verify"]["ok"] is True
    assert out["verify"]["violations"] == []


def test_verify_stored_log(tmp_path, capsys):
    main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
          "--seed", "2", "--out", str(tmp_path)])
    capsys.readouterr()
    rc = main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
               "--verify", "--log", str(tmp_path / "run_log.jsonl"),
               "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out.strip())
    assert report["ok"] is True


def test_verify_flags_tampered_log(tmp_path, capsys):
    main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
          "--seed", "2", "--out", str(tmp_path)])
    capsys.readouterr()
    log_path = tmp_path / "run_log.jsonl"
    lines = [json.loads(l) for l in log_path.read_text().splitlines()]
    lines = [r for r in lines
             if not (r["ev"] == "task_completed" and r["task"] == "tp_1")]
    log_path.write_text("\n".join(json.dumps(r, sort_keys=True)
                                  for r in lines) + "\n")
    rc = main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
               "--verify", "--log", str(log_path), "--out", str(tmp_path)])
    assert rc == 1
    report = json.loads(capsys.readouterr().out.strip())
    assert not report["ok"]


def test_unparseable_scenario_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    src = (SCENARIOS / "mini_plant.yaml").read_text()
    bad.write_text(src.replace("extra: []", 'extra: ["(<> tp_1"]'))
    rc = main(["run", "--scenario", str(bad), "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    diag = json.loads(err.strip())
    assert diag["error"] == "scenario_validation"
    assert any("LTL" in d["message"] for d in diag["diagnostics"])


def test_run_with_intervention_trace(tmp_path, capsys):
    trace = tmp_path / "iv.jsonl"
    trace.write_text(json.dumps(
        {"t": 1.0, "kind": "define_region",
         "payload": {"resource_type": "water",
                     "polygon": [[10, 10], [50, 10], [50, 50], [10, 50]]}})
        + "\n")
    rc = main(["run", "--scenario", str(SCENARIOS / "mini_plant.yaml"),
               "--seed", "3", "--out", str(tmp_path),
               "--interventions", str(trace)])
    assert rc == 0
    capsys.readouterr()
    recorded = (tmp_path / "recorded_interventions.jsonl").read_text()
    assert "define_region" in recorded


def test_bench_reports_full_horizon_instance(tmp_path, capsys):
    rc = main(["bench", "--out", str(tmp_path)])
    assert rc == 0
    table = (tmp_path / "bench.csv").read_text().splitlines()
    assert table[0].startswith("instance,")
    full = [line for line in table if line.startswith("full_horizon_15x5")]
    assert len(full) == 1
    fields = full[0].split(",")
    assert fields[2] == "15x5" and fields[3] == "True"
    trivial = [line for line in table if line.startswith("trivial_1x1")]
    assert trivial and float(trivial[0].split(",")[5]) < 1000.0
    # summary row count matches instance count (header + instances)
    assert len(table) == 1 + 14
