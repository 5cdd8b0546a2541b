import json
import threading
import time
import urllib.request
from pathlib import Path

import pytest

from swarmplan.engine import Engine
from swarmplan.runlog import dump_log
from swarmplan.scenario import load_scenario
from swarmplan.service import make_server

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


class Client:
    def __init__(self, port):
        self.base = f"http://127.0.0.1:{port}"

    def get(self, path):
        try:
            with urllib.request.urlopen(self.base + path, timeout=10) as resp:
                return resp.status, json.loads(resp.read().decode())
        except urllib.error.HTTPError as err:
            return err.code, json.loads(err.read().decode())

    def post(self, path, payload):
        req = urllib.request.Request(
            self.base + path, data=json.dumps(payload).encode(),
            headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=30) as resp:
                return resp.status, json.loads(resp.read().decode())
        except urllib.error.HTTPError as err:
            return err.code, json.loads(err.read().decode())


@pytest.fixture()
def service():
    scenario = load_scenario(str(SCENARIOS / "interventions_demo.yaml"))
    server, manager = make_server(scenario, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    client = Client(server.server_port)
    yield client, manager
    manager.stop()
    server.shutdown()


def wait_until(predicate, timeout=30.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    raise TimeoutError("condition not met")


def test_state_before_run_conflicts(service):
    client, _ = service
    status, body = client.get("/run/state")
    assert status == 409


def test_live_session_parity_and_four_families(service, tmp_path):
    client, manager = service
    status, ack = client.post("/run", {"seed": 9, "rate": 40.0})
    assert status == 202 and ack["started"]

    # family 2 (approve/edit): wait for the rescue approval card
    state = wait_until(lambda: (lambda s: s if s["pending_approvals"] else None)(
        client.get("/run/state")[1]))
    approval = state["pending_approvals"][0]
    status, result = client.post("/run/intervention", {
        "kind": "confirm_or_edit_plan", "approval": approval["id"]})
    assert status == 200 and result["accepted"]

    # family 1 (relabel): af_1 is gated behind the rescue, still pending
    status, result = client.post("/run/intervention", {
        "kind": "relabel_feature", "feature": "af_1",
        "new_type": "high_voltage_electrical_flame"})
    assert status == 200 and result["accepted"]

    # family 4 (region draw)
    status, result = client.post("/run/intervention", {
        "kind": "define_region", "resource_type": "water",
        "polygon": [[60, 40], [80, 40], [80, 70], [60, 70]]})
    assert status == 200 and result["accepted"]
    state = client.get("/run/state")[1]
    assert "water" in state["regions"]

    # family 3 (drag-drop reassign): pin a pending rescue-task monitor unit
    def monitor_pending():
        s = client.get("/run/state")[1]
        tp = [t for t in s["tasks"] if t["id"] == "tp_1"][0]
        return tp if tp["status"] == "running" else None
    wait_until(monitor_pending)
    status, result = client.post("/run/intervention", {
        "kind": "reassign_subtask", "subtask": "tp_1_s0_n4",
        "robot": "g1_uav"})
    assert status == 200 and result["accepted"], result

    # gated group's robots are idle: trigger a manual skill
    status, result = client.post("/run/intervention", {
        "kind": "trigger_skill", "robot": "g2_uav", "skill": "inspect",
        "target": [100, 40]})
    assert status == 200 and result["accepted"]

    # second approval (the relabeled electrical fire) may arrive later
    def approve_rest():
        s = client.get("/run/state")[1]
        for card in s["pending_approvals"]:
            client.post("/run/intervention", {
                "kind": "confirm_or_edit_plan", "approval": card["id"]})
        return s["status"] == "ended"
    wait_until(approve_rest, timeout=120.0)

    engine = manager.engine
    assert engine.metrics.tasks_completed == 2
    live_log = dump_log(engine.log)
    recorded = [
        {"t": rec["t"] / 1000.0, "kind": rec["kind"], **rec["payload"]}
        for rec in engine.recorded_interventions
    ]
    assert {r["kind"] for r in recorded} >= {
        "confirm_or_edit_plan", "relabel_feature", "define_region",
        "reassign_subtask", "trigger_skill"}

    # headless replay of the recorded trace reproduces the identical log
    scenario = load_scenario(str(SCENARIOS / "interventions_demo.yaml"))
    replay = Engine(scenario, seed=9, interventions=recorded)
    replay.run()
    assert dump_log(replay.log) == live_log


def test_event_stream_delivers_records(service):
    client, manager = service
    client.post("/run", {"seed": 1, "rate": 0.0})
    wait_until(lambda: manager.engine is not None and manager.engine.ended,
               timeout=60.0)
    req = urllib.request.Request(client.base + "/run/events?cursor=0")
    with urllib.request.urlopen(req, timeout=10) as resp:
        assert resp.headers["Content-Type"].startswith("text/event-stream")
        seen_end = False
        records = 0
        for raw in resp:
            line = raw.decode().strip()
            if line.startswith("data: {"):
                records += 1
            if line.startswith("event: end"):
                seen_end = True
                break
        assert records > 50 and seen_end


def test_gantt_and_automata_endpoints(service):
    client, manager = service
    client.post("/run", {"seed": 2, "rate": 0.0})
    wait_until(lambda: manager.engine is not None and manager.engine.ended,
               timeout=60.0)
    status, gantt = client.get("/run/gantt")
    assert status == 200
    assert gantt["tasks"] and gantt["subtasks"]
    status, automata = client.get("/run/automata")
    assert status == 200
    assert all(snap["verdict"] == "accepting" for snap in automata)
    assert any(s["current"] and s["accepting"]
               for snap in automata for s in snap["states"])


def test_second_run_start_conflicts(service):
    client, manager = service
    client.post("/run", {"seed": 3, "rate": 50.0})
    status, body = client.post("/run", {"seed": 4})
    assert status == 409
    manager.stop()


def test_malformed_intervention_rejected(service):
    client, manager = service
    client.post("/run", {"seed": 5, "rate": 50.0})
    status, result = client.post("/run/intervention", {
        "kind": "no_such_kind"})
    assert status == 422 and not result["accepted"]
    status, result = client.post("/run/intervention", {})
    assert status == 400
    manager.stop()
