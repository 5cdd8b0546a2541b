"""HTTP service exposing a live run to the operator console.

Endpoints:
  POST /run               start a run ({"seed": int, "rate": float})
  GET  /run/state         current state snapshot
  GET  /run/gantt         task/subtask timeline rows
  GET  /run/automata      mission automaton snapshots with executed traces
  POST /run/intervention  apply an operator action; acknowledged or rejected
  GET  /run/events        server-sent event stream of run-log records

All engine mutations funnel through the simulation loop; reads are served
from locked snapshots.  Interventions are answered only after the loop has
applied them, so the acknowledgment carries the definitive outcome.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .engine import Engine
from .scenario import Scenario


class RunManager:
    def __init__(self, scenario: Scenario, seed: int = 0,
                 no_human: bool = False):
        self.scenario = scenario
        self.default_seed = seed
        self.no_human = no_human
        self.engine: Optional[Engine] = None
        self.thread: Optional[threading.Thread] = None
        self.lock = threading.Lock()

    def start(self, seed: Optional[int], rate: float) -> dict:
        with self.lock:
            if self.engine is not None and not self.engine.ended:
                raise RuntimeError("a run is already in progress")
            engine = Engine(
                self.scenario, seed=self.default_seed if seed is None else seed,
                human_override=False if self.no_human else None)
            engine.pace = max(0.0, rate)
            self.engine = engine
            self.thread = threading.Thread(target=engine.run, daemon=True)
            self.thread.start()
        return {"started": True, "seed": engine.seed, "rate": engine.pace}

    def require_engine(self) -> Engine:
        engine = self.engine
        if engine is None:
            raise RuntimeError("no run started")
        return engine

    def intervene(self, payload: dict, timeout: float = 30.0) -> dict:
        engine = self.require_engine()
        ticket = engine.submit_intervention(payload)
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            result = engine.intervention_results.get(ticket)
            if result is not None:
                return result
            if engine.ended:
                return {"accepted": False, "reason": "run ended", "t": None}
            time.sleep(0.01)
        return {"accepted": False, "reason": "timeout waiting for engine",
                "t": None}

    def stop(self) -> None:
        engine = self.engine
        if engine is not None:
            engine.stop_requested = True
        if self.thread is not None:
            self.thread.join(timeout=5.0)


def _gantt_payload(engine: Engine) -> dict:
    tasks = []
    subtasks = []
    with engine.lock:
        log = list(engine.log)
    started = {}
    types = {}
    groups = {}
    for rec in log:
        if rec["ev"] == "task_created":
            types[rec["task"]] = rec["type"]
        elif rec["ev"] == "task_started":
            started[rec["task"]] = rec["t"]
            groups[rec["task"]] = rec.get("group", "")
        elif rec["ev"] == "task_completed":
            tasks.append({"task": rec["task"],
                          "type": types.get(rec["task"], ""),
                          "group": groups.get(rec["task"], ""),
                          "start_ms": started.get(rec["task"]),
                          "end_ms": rec["t"]})
        elif rec["ev"] == "subtask_completed":
            for robot in rec["robots"]:
                subtasks.append({"subtask": rec["subtask"],
                                 "task": rec["task"], "robot": robot,
                                 "start_ms": rec["started"],
                                 "end_ms": rec["ended"]})
    open_tasks = [{"task": t, "type": types.get(t, ""),
                   "group": groups.get(t, ""), "start_ms": s, "end_ms": None}
                  for t, s in started.items()
                  if t not in {row["task"] for row in tasks}]
    return {"tasks": tasks + sorted(open_tasks, key=lambda r: r["task"]),
            "subtasks": subtasks}


def make_handler(manager: RunManager, static_dir: Optional[Path]):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # quiet
            pass

        def _json(self, code: int, payload) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if not length:
                return {}
            return json.loads(self.rfile.read(length).decode("utf-8"))

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_POST(self):
            try:
                if self.path == "/run":
                    body = self._read_body()
                    result = manager.start(body.get("seed"),
                                           float(body.get("rate", 0.0)))
                    self._json(202, result)
                elif self.path == "/run/intervention":
                    body = self._read_body()
                    if "kind" not in body:
                        self._json(400, {"accepted": False,
                                         "reason": "missing kind"})
                        return
                    result = manager.intervene(body)
                    code = 200 if result.get("accepted") else 422
                    self._json(code, result)
                else:
                    self._json(404, {"error": "not found"})
            except RuntimeError as exc:
                self._json(409, {"error": str(exc)})
            except Exception as exc:  # noqa: BLE001 - service boundary
                self._json(500, {"error": str(exc)})

        def do_GET(self):
            try:
                if self.path == "/run/state":
                    self._json(200, manager.require_engine().state_snapshot())
                elif self.path == "/run/gantt":
                    self._json(200, _gantt_payload(manager.require_engine()))
                elif self.path == "/run/automata":
                    engine = manager.require_engine()
                    with engine.lock:
                        self._json(200, engine.automata_snapshots())
                elif self.path.startswith("/run/events"):
                    self._sse()
                elif self.path == "/run/log":
                    engine = manager.require_engine()
                    with engine.lock:
                        self._json(200, list(engine.log))
                else:
                    self._static()
            except RuntimeError as exc:
                self._json(409, {"error": str(exc)})
            except (BrokenPipeError, ConnectionResetError):
                pass
            except Exception as exc:  # noqa: BLE001 - service boundary
                self._json(500, {"error": str(exc)})

        def _sse(self) -> None:
            engine = manager.require_engine()
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Connection", "close")
            self.close_connection = True
            self.end_headers()
            cursor = 0
            if "cursor=" in self.path:
                cursor = int(self.path.split("cursor=")[1].split("&")[0])
            idle = 0.0
            while True:
                with engine.lock:
                    chunk = list(engine.log[cursor:])
                for rec in chunk:
                    data = json.dumps(rec, sort_keys=True)
                    self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                cursor += len(chunk)
                if chunk:
                    self.wfile.flush()
                    idle = 0.0
                else:
                    if engine.ended:
                        self.wfile.write(b"event: end\ndata: {}\n\n")
                        self.wfile.flush()
                        return
                    time.sleep(0.05)
                    idle += 0.05
                    if idle >= 15.0:
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        idle = 0.0

        def _static(self) -> None:
            if static_dir is None:
                self._json(404, {"error": "not found"})
                return
            rel = self.path.lstrip("/") or "index.html"
            target = (static_dir / rel).resolve()
            if not str(target).startswith(str(static_dir.resolve())) or \
                    not target.is_file():
                self._json(404, {"error": "not found"})
                return
            body = target.read_bytes()
            ctype = {
                ".html": "text/html", ".js": "text/javascript",
                ".css": "text/css", ".map": "application/json",
            }.get(target.suffix, "application/octet-stream")
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def make_server(scenario: Scenario, host: str, port: int, seed: int = 0,
                no_human: bool = False,
                static_dir: Optional[str] = None
                ) -> tuple[ThreadingHTTPServer, RunManager]:
    manager = RunManager(scenario, seed=seed, no_human=no_human)
    sdir = None
    if static_dir:
        sdir = Path(static_dir)
    else:
        candidate = Path(__file__).resolve().parents[2] / "frontend"
        if (candidate / "index.html").is_file():
            sdir = candidate
    server = ThreadingHTTPServer((host, port), make_handler(manager, sdir))
    return server, manager


def serve(scenario: Scenario, host: str, port: int, seed: int = 0,
          no_human: bool = False) -> None:
    server, manager = make_server(scenario, host, port, seed=seed,
                                  no_human=no_human)
    print(f"swarmplan service on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        manager.stop()
        server.server_close()
