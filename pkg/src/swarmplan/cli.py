"""Command-line entry points: run, serve, bench."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import Engine
from .runlog import load_log, verify_log, write_gantt, write_json, write_log
from .scenario import ScenarioError, diagnostics_json, load_scenario


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swarmplan",
        description="Mission planning and coordination engine for "
                    "heterogeneous robot swarms")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario headlessly")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--interventions",
                       help="scripted intervention trace (JSONL)")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--verify", action="store_true",
                       help="replay the stored log through the monitor "
                            "and fail on any violation")
    p_run.add_argument("--log", help="verify this stored log instead of "
                                     "running (requires --verify)")
    p_run.add_argument("--no-human", action="store_true",
                       help="disable approval gates")

    p_serve = sub.add_parser("serve", help="serve the operator API")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--bind", default="127.0.0.1:8721")
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--no-human", action="store_true")

    p_bench = sub.add_parser("bench", help="run the solver benchmark corpora")
    p_bench.add_argument("--corpus", help="directory of instance files "
                                          "(defaults to the generated corpus)")
    p_bench.add_argument("--out", default="bench_out")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "bench":
        return cmd_bench(args)
    return 2


def _load_interventions(path: str) -> list[dict]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        payload = dict(rec.get("payload", {}))
        payload["t"] = rec.get("t", 0) / 1000.0 if rec.get("t", 0) > 1e6 \
            else float(rec.get("t", 0.0))
        payload["kind"] = rec["kind"]
        out.append(payload)
    return out


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as err:
        print(diagnostics_json(err), file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.log:
        if not args.verify:
            print("--log requires --verify", file=sys.stderr)
            return 2
        report = verify_log(scenario, load_log(args.log))
        print(json.dumps(report, sort_keys=True))
        return 0 if report["ok"] else 1

    interventions = _load_interventions(args.interventions) \
        if args.interventions else []
    engine = Engine(scenario, seed=args.seed, interventions=interventions,
                    human_override=False if args.no_human else None)
    try:
        metrics = engine.run()
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": "run_failed", "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        raise

    log_path = out_dir / "run_log.jsonl"
    write_log(str(log_path), engine.log)
    write_json(str(out_dir / "metrics.json"),
               metrics.as_dict(deterministic=True))
    write_json(str(out_dir / "timings.json"), {
        "solve_ms_max": round(metrics.solve_ms_max, 3),
        "dispatch": engine.solve_timings,
    })
    write_gantt(str(out_dir), engine.log)
    write_json(str(out_dir / "automata.json"), engine.automata_snapshots())
    (out_dir / "task_dag.dot").write_text(engine.task_dag_export() + "\n",
                                          encoding="utf-8")
    recorded = [{"t": rec["t"], "kind": rec["kind"],
                 "payload": rec["payload"]}
                for rec in engine.recorded_interventions]
    (out_dir / "recorded_interventions.jsonl").write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in recorded),
        encoding="utf-8")

    summary = {
        "tasks_completed": metrics.tasks_completed,
        "tasks_total": metrics.tasks_total,
        "makespan_ms": metrics.makespan_ms,
        "log": str(log_path),
    }
    if args.verify:
        report = verify_log(scenario, load_log(str(log_path)))
        summary["verify"] = report
        print(json.dumps(summary, sort_keys=True))
        return 0 if report["ok"] else 1
    print(json.dumps(summary, sort_keys=True))
    return 0 if metrics.tasks_failed == 0 else 1


def cmd_serve(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as err:
        print(diagnostics_json(err), file=sys.stderr)
        return 2
    from .service import serve
    host, _, port = args.bind.partition(":")
    serve(scenario, host or "127.0.0.1", int(port or 8721),
          seed=args.seed, no_human=args.no_human)
    return 0


def cmd_bench(args) -> int:
    from .bench import run_bench
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = run_bench(args.corpus)
    csv_path = out_dir / "bench.csv"
    lines = ["instance,kind,size,optimal,objective,runtime_ms,gap"]
    for row in table:
        lines.append(
            f"{row['instance']},{row['kind']},{row['size']},"
            f"{row['optimal']},{row['objective']},{row['runtime_ms']},"
            f"{row['gap']}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
