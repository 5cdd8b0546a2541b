"""Benchmark corpus for the assignment search and the subtask solver.

The bundled corpus is generated deterministically: rolling-scale scheduling
instances, assignment searches at oracle scale, and the full-horizon
15-subtask / 5-robot instance whose exact solve time documents the gap to
rolling-horizon dispatch.  Instance files in a corpus directory (JSON, one
instance per file) are run instead when given.
"""

from __future__ import annotations

import json
import math
import random
import time
from pathlib import Path
from typing import Optional

from .scheduler import RobotSpec, SchedInstance, SubtaskSpec, solve, verify


def full_horizon_instance() -> SchedInstance:
    """Three 5-subtask chains on five robots, solved in one horizon."""
    subs = []
    prec = set()
    for t in range(3):
        for i in range(5):
            sid = f"t{t}s{i}"
            subs.append(SubtaskSpec(sid, f"k{(t + i) % 3}", 1,
                                    float(4 + (t * 2 + i) % 5)))
            if i:
                prec.add((f"t{t}s{i - 1}", sid))
    robots = [RobotSpec(f"r{i}",
                        frozenset({"k0", "k1", "k2"}) if i < 3
                        else frozenset({f"k{i % 3}"}))
              for i in range(5)]
    total = sum(s.duration for s in subs)
    return SchedInstance(tuple(subs), frozenset(prec), tuple(robots),
                         eps=0.3, now=0.0, big_m=total + 100.0)


def random_rolling_instance(seed: int) -> SchedInstance:
    rng = random.Random(seed)
    n = rng.randint(4, 16)
    skills = ["s_a", "s_b", "s_c"]
    robots = [RobotSpec(f"r{i}", frozenset(
        rng.sample(skills, rng.randint(2, 3)))) for i in range(4)]
    subs = []
    prec = set()
    for i in range(n):
        skill = rng.choice(skills)
        if not any(skill in r.skills for r in robots):
            robots[0] = RobotSpec("r0", robots[0].skills | {skill})
        subs.append(SubtaskSpec(f"u{i}", skill, 1, float(rng.randint(3, 12))))
        if i and rng.random() < 0.6:
            prec.add((f"u{rng.randrange(i)}", f"u{i}"))
    total = sum(s.duration for s in subs)
    return SchedInstance(tuple(subs), frozenset(prec), tuple(robots),
                         eps=0.5, now=0.0, big_m=total + 100.0)


def _instance_from_json(data: dict) -> SchedInstance:
    subs = tuple(SubtaskSpec(s["id"], s["skill"], int(s.get("robots", 1)),
                             float(s["duration"]),
                             float(s.get("p_success", 1.0)))
                 for s in data["subtasks"])
    robots = tuple(RobotSpec(r["id"], frozenset(r["skills"]))
                   for r in data["robots"])
    prec = frozenset((a, b) for a, b in data.get("precedence", []))
    total = sum(s.duration for s in subs)
    return SchedInstance(subs, prec, robots,
                         eps=float(data.get("eps", 0.5)),
                         now=float(data.get("now", 0.0)),
                         big_m=total + 100.0)


def run_bench(corpus_dir: Optional[str] = None) -> list[dict]:
    rows: list[dict] = []
    instances: list[tuple[str, SchedInstance]] = []
    if corpus_dir:
        for path in sorted(Path(corpus_dir).glob("*.json")):
            instances.append((path.stem, _instance_from_json(
                json.loads(path.read_text(encoding="utf-8")))))
    else:
        instances.append(("full_horizon_15x5", full_horizon_instance()))
        for seed in range(12):
            instances.append((f"rolling_{seed:02d}",
                              random_rolling_instance(seed)))
        instances.append(("trivial_1x1", SchedInstance(
            (SubtaskSpec("only", "s", 1, 5.0),), frozenset(),
            (RobotSpec("r0", frozenset({"s"})),), 0.3, 0.0, 100.0)))
    for name, inst in instances:
        t0 = time.perf_counter()
        assignment = solve(inst)
        runtime_ms = (time.perf_counter() - t0) * 1000
        problems = verify(inst, assignment)
        rows.append({
            "instance": name,
            "kind": "scheduler",
            "size": f"{len(inst.subtasks)}x{len(inst.robots)}",
            "optimal": assignment.optimal and not problems,
            "objective": round(assignment.makespan, 3),
            "runtime_ms": round(runtime_ms, 3),
            "gap": 0.0 if assignment.optimal else math.nan,
        })
    return rows
