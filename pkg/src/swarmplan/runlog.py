"""Run-log persistence, artifact export, and independent log verification.

The run log is line-delimited JSON with sorted keys and millisecond integer
timestamps, so identical runs serialize byte-identically.  Verification
rebuilds the mission automata from the log's own mission records and replays
the completion trace, re-checks every synchronization rule, and scans for
robot double-booking; it needs only the log and the scenario file.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .ltl import parse_ltl
from .monitor import ACCEPTING, MissionTracker, SyncRule, check_sync, observe, verdict
from .scenario import Scenario
from .translate import translate_to_nba


def dump_log(log: list[dict]) -> str:
    return "\n".join(json.dumps(rec, sort_keys=True) for rec in log) + "\n"


def write_log(path: str, log: list[dict]) -> None:
    Path(path).write_text(dump_log(log), encoding="utf-8")


def load_log(path: str) -> list[dict]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            out.append(json.loads(line))
    return out


def write_json(path: str, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def write_gantt(out_dir: str, log: list[dict]) -> tuple[str, str]:
    """Task- and subtask-level timeline tables derived from the log."""
    task_rows = {}
    sub_rows = []
    task_group = {}
    task_type = {}
    for rec in log:
        if rec["ev"] == "task_created":
            task_type[rec["task"]] = rec["type"]
        elif rec["ev"] == "task_started":
            task_rows[rec["task"]] = {"start": rec["t"], "end": None}
            task_group[rec["task"]] = rec.get("group", "")
        elif rec["ev"] == "task_completed" and rec["task"] in task_rows:
            task_rows[rec["task"]]["end"] = rec["t"]
        elif rec["ev"] == "subtask_completed":
            for robot in rec["robots"]:
                sub_rows.append({
                    "subtask": rec["subtask"], "task": rec["task"],
                    "robot": robot, "start_ms": rec["started"],
                    "end_ms": rec["ended"],
                })
    tasks_path = str(Path(out_dir) / "gantt_tasks.csv")
    with open(tasks_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "type", "group", "start_ms", "end_ms"])
        for task in sorted(task_rows):
            row = task_rows[task]
            w.writerow([task, task_type.get(task, ""), task_group.get(task, ""),
                        row["start"], row["end"] if row["end"] is not None else ""])
    subs_path = str(Path(out_dir) / "gantt_subtasks.csv")
    sub_rows.sort(key=lambda r: (r["start_ms"], r["subtask"], r["robot"]))
    with open(subs_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subtask", "task", "robot", "start_ms", "end_ms"])
        for row in sub_rows:
            w.writerow([row["subtask"], row["task"], row["robot"],
                        row["start_ms"], row["end_ms"]])
    return tasks_path, subs_path


def verify_log(scenario: Scenario, log: list[dict]) -> dict:
    """Replay a stored log against its own mission set and sync rules.

    Returns a report with the final mission verdicts, every synchronization
    violation, robot double-bookings, and ordering breaches.  Self-contained:
    everything needed is in the log plus the scenario's planner budget.
    """
    problems: list[str] = []
    trackers: dict[str, MissionTracker] = {}
    sync_rules: list[SyncRule] = []
    pair_rules: list[tuple[str, str]] = []
    subtask_sched: dict[str, list[tuple[str, float, float]]] = {}
    task_sched: dict[str, dict[str, list[tuple[float, float]]]] = {}
    multi_robot_subtasks: set[str] = set()
    robot_busy: dict[str, list[tuple[float, float, str]]] = {}
    failed_robots: dict[str, float] = {}

    for rec in log:
        ev = rec["ev"]
        t = rec["t"] / 1000.0
        if ev == "mission_added":
            automaton = translate_to_nba(
                parse_ltl(rec["formula"]),
                state_budget=scenario.planner.state_budget)
            trackers[rec["mission"]] = MissionTracker(
                rec["mission"], automaton, formula_text=rec["formula"])
        elif ev == "sync_rule" and rec["kind"] == "precedes":
            sync_rules.append(SyncRule("precedes", rec["up"], rec["down"]))
            pair_rules.append((rec["up"], rec["down"]))
        elif ev == "poset_rule":
            rule = SyncRule("precedes", rec["up"], rec["down"])
            if rule not in sync_rules:
                sync_rules.append(rule)
                pair_rules.append((rec["up"], rec["down"]))
        elif ev == "task_completed":
            label = frozenset({rec["task"]})
            for mid in sorted(trackers):
                observe(trackers[mid], t, label)
        elif ev == "subtask_started":
            if len(rec["robots"]) > 1:
                multi_robot_subtasks.add(rec["subtask"])
                starts = set(rec["starts"].values())
                if len(starts) > 1:
                    problems.append(
                        f"subtask {rec['subtask']} starts not aligned: "
                        f"{sorted(starts)}")
            for robot, start_ms in rec["starts"].items():
                # same-instant starts are legitimate: completions at a given
                # time are ordered before adaptation events
                if robot in failed_robots and \
                        start_ms / 1000.0 > failed_robots[robot]:
                    problems.append(
                        f"failed robot {robot} started {rec['subtask']}")
        elif ev == "subtask_completed":
            s = rec["started"] / 1000.0
            e = rec["ended"] / 1000.0
            for robot in rec["robots"]:
                subtask_sched.setdefault(rec["subtask"], []).append(
                    (robot, s, e))
                task_sched.setdefault(rec["task"], {}).setdefault(
                    robot, []).append((s, e))
                robot_busy.setdefault(robot, []).append(
                    (s, e, rec["subtask"]))
        elif ev == "robot_failed":
            failed_robots[rec["robot"]] = t

    for sid in sorted(multi_robot_subtasks):
        sync_rules.append(SyncRule("simultaneous", sid, sid))

    task_level: dict[str, list[tuple[str, float, float]]] = {}
    for task, per_robot in task_sched.items():
        triples = []
        for robot in sorted(per_robot):
            spans = per_robot[robot]
            triples.append((robot, min(s for s, _ in spans),
                            max(e for _, e in spans)))
        task_level[task] = triples

    schedule = dict(task_level)
    schedule.update(subtask_sched)
    violations = check_sync(sync_rules, schedule)
    for v in violations:
        problems.append(f"sync {v.rule.kind} {v.rule.upstream}->"
                        f"{v.rule.downstream}: {v.detail}")

    # ordering breaches straight from completion order
    completion_at: dict[str, float] = {}
    start_at: dict[str, float] = {}
    for rec in log:
        if rec["ev"] == "task_completed":
            completion_at[rec["task"]] = rec["t"] / 1000.0
        if rec["ev"] == "task_started":
            start_at[rec["task"]] = rec["t"] / 1000.0
    for up, down in pair_rules:
        if down in start_at and up in completion_at:
            if start_at[down] < completion_at[up]:
                problems.append(
                    f"order: {down} started {start_at[down]:.3f} before "
                    f"{up} completed {completion_at[up]:.3f}")
        elif down in start_at and up not in completion_at:
            problems.append(f"order: {down} ran but {up} never completed")

    for robot in sorted(robot_busy):
        spans = sorted(robot_busy[robot])
        for (s1, e1, i1), (s2, e2, i2) in zip(spans, spans[1:]):
            if i1 != i2 and s2 < e1 - 1e-9:
                problems.append(
                    f"robot {robot} double-booked: {i1} and {i2}")

    verdicts = {mid: verdict(trackers[mid]) for mid in sorted(trackers)}
    all_accepting = bool(trackers) and all(
        v == ACCEPTING for v in verdicts.values())
    return {
        "ok": not problems and all_accepting,
        "all_accepting": all_accepting,
        "verdicts": verdicts,
        "violations": problems,
        "missions": len(trackers),
    }


def rescue_before_fire_holds(log: list[dict], rescue_types=None) -> bool:
    """Every rescue-category task completes before any other task starts work."""
    from .catalog import RESCUE_FEATURES
    if rescue_types is None:
        rescue_types = RESCUE_FEATURES
    types = {}
    for rec in log:
        if rec["ev"] == "task_created":
            types[rec["task"]] = rec["type"]
    rescue_done = [rec["t"] for rec in log if rec["ev"] == "task_completed"
                   and types.get(rec["task"]) in rescue_types]
    other_started = [rec["t"] for rec in log if rec["ev"] == "task_started"
                     and types.get(rec["task"]) not in rescue_types]
    if not rescue_done:
        return True
    latest_rescue = max(rescue_done)
    return all(t >= latest_rescue for t in other_started)
