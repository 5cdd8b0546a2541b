#!/usr/bin/env python3
"""Run the bundled mini-plant scenario and print the mission timeline."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from swarmplan.engine import Engine  # noqa: E402
from swarmplan.monitor import verdict  # noqa: E402
from swarmplan.scenario import load_scenario  # noqa: E402


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    scenario = load_scenario(str(ROOT / "scenarios" / "mini_plant.yaml"))
    engine = Engine(scenario, seed=seed)
    metrics = engine.run()
    print(f"seed {seed}: {metrics.tasks_completed}/{metrics.tasks_total} "
          f"tasks in {metrics.makespan_ms / 1000:.1f}s simulated")
    print("module invocations:", metrics.invocations)
    print("timeline:")
    for rec in engine.log:
        if rec["ev"] in ("task_started", "task_completed",
                         "exploration_result", "adaptation"):
            stamp = rec["t"] / 1000.0
            extra = {k: v for k, v in rec.items() if k not in ("t", "ev")}
            print(f"  {stamp:8.1f}s {rec['ev']:16s} {extra}")
    bad = {m: verdict(tr) for m, tr in engine.trackers.items()
           if verdict(tr) != "accepting"}
    print("non-accepting missions:", bad if bad else "none")


if __name__ == "__main__":
    main()
