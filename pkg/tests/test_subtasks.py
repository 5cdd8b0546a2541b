import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from swarmplan.subtasks import (BackendError, HttpBackend, LayeredDag,
                                PlanLibrary, PromptContext, RuleBackend,
                                SubtaskNode, build_prompt, cosine, generate,
                                insert_exploration, parse_schemes, retrieve,
                                stage_one_prompt, stage_three_prompt,
                                stage_two_prompt, validate_dag)

LIB_PATH = Path(__file__).resolve().parent.parent / "scenarios" / "plan_library.json"
SERVICE = {"inspect": 8.0, "operate": 6.0, "liquid_spray": 10.0,
           "gas_spray": 8.0, "solid_spray": 8.0, "monitor": 6.0, "lay": 10.0,
           "clean_up": 10.0, "rescue": 12.0, "ignite": 5.0, "fix": 12.0,
           "local_exploration": 10.0}
ALL_CAPS = ("inspect", "operate", "liquid_spray", "gas_spray", "solid_spray",
            "monitor", "lay", "clean_up", "rescue", "ignite", "fix",
            "local_exploration")


def library():
    return PlanLibrary.load(str(LIB_PATH))


# --- retrieval --------------------------------------------------------------------

def test_electrical_fire_retrieves_high_voltage_plan():
    ranked = retrieve("electrical fire", library(), top_n=3)
    assert "high voltage electrical" in ranked[0][1].lower()


def test_identical_query_scores_maximal():
    lib = library()
    entry = lib.entries[3]
    ranked = retrieve(entry, lib, top_n=len(lib.entries))
    assert ranked[0][0] == 3
    assert ranked[0][2] == pytest.approx(1.0)
    assert all(ranked[0][2] >= s for _, _, s in ranked)


def test_cosine_hand_computed_on_toy_vocabulary():
    lib = PlanLibrary(["water pump water", "pump valve", "water valve pump"])
    # query "water pump": q = {water:1, pump:1}, |q| = sqrt(2)
    ranked = retrieve("water pump", lib, top_n=3)
    # entry0 = {water:2, pump:1}: dot=3, |e0|=sqrt(5) -> 3/(sqrt(2)*sqrt(5))
    expected0 = 3 / (math.sqrt(2) * math.sqrt(5))
    expected1 = 1 / (math.sqrt(2) * math.sqrt(2))
    expected2 = 2 / (math.sqrt(2) * math.sqrt(3))
    assert ranked[0][0] == 0 and ranked[0][2] == pytest.approx(expected0)
    by_ix = {ix: s for ix, _, s in ranked}
    assert by_ix[1] == pytest.approx(expected1)
    assert by_ix[2] == pytest.approx(expected2)


def test_retrieve_deterministic_tie_break():
    lib = PlanLibrary(["alpha beta", "alpha beta", "gamma"])
    ranked = retrieve("alpha", lib, top_n=2)
    assert [r[0] for r in ranked] == [0, 1]


def test_retrieve_rejects_bad_top_n():
    with pytest.raises(ValueError):
        retrieve("x", library(), top_n=0)


def test_plan_library_rejects_empty_entry():
    with pytest.raises(ValueError):
        PlanLibrary(["ok", "  "])


# --- prompts ----------------------------------------------------------------------

def ctx_for(task_type="alkane_gas_flame", caps=("inspect", "operate",
                                                "liquid_spray", "monitor"),
            perception=(("valve", (3.0, 4.0)), ("water", (8.0, 1.0)))):
    return build_prompt("af_1", task_type, "retrieved plan text", caps,
                        perception)


def test_stage_one_lists_skills_and_resources():
    p = stage_one_prompt(ctx_for())
    assert "Task: name: af_1; type: alkane_gas_flame" in p
    for line in ("- inspect:", "- liquid_spray:", "- monitor:", "- operate:"):
        assert line in p
    assert "Resources: valve, water" in p
    assert "related_knowledge_analysis" in p


def test_empty_perception_keeps_sections_well_formed():
    p = stage_one_prompt(ctx_for(perception=()))
    assert "Resources: \n" in p
    assert "Related Knowledge:" in p


def test_stage_three_embeds_analysis_verbatim():
    analysis = "the analysis paragraph with exact wording"
    p = stage_three_prompt(ctx_for(), analysis, "draft text")
    assert f"Related Knowledge Analysis: {analysis}" in p
    assert "required_skill" in p and "dependency" in p


def test_unknown_skill_rejected():
    with pytest.raises(ValueError):
        build_prompt("t", "x", "k", ("teleport",), ())


# --- rule backend -----------------------------------------------------------------

def gen(task_type, caps=ALL_CAPS, perception=(("valve", (0, 0)),
                                              ("water", (0, 0))),
        known=frozenset({"valve", "water"}), backend=None):
    ctx = build_prompt(f"{task_type}_1", task_type, "plan", caps, perception)
    return generate(ctx, backend or RuleBackend(), SERVICE, known,
                    task_id=f"{task_type}_1")


def test_alkane_flame_two_schemes():
    dags = gen("alkane_gas_flame")
    assert len(dags) == 2
    first = [(n.skill, n.resource, n.robots) for n in dags[0].nodes]
    assert first == [("inspect", None, 2), ("operate", "valve", 1),
                     ("monitor", None, 2)]
    second = [(n.skill, n.resource, n.robots) for n in dags[1].nodes]
    assert second == [("inspect", None, 2), ("liquid_spray", "water", 1),
                      ("monitor", None, 2)]
    for dag in dags:
        assert validate_dag(dag, frozenset(ALL_CAPS)) == []


def test_damaged_tank_scheme():
    dags = gen("damaged_tank", perception=(("water", (0, 0)),),
               known=frozenset({"water"}))
    assert len(dags) == 1
    steps = [(n.skill, n.resource, n.robots) for n in dags[0].nodes]
    assert steps == [("liquid_spray", "water", 1), ("fix", None, 1),
                     ("monitor", None, 2)]


def test_rule_backend_pure_function_of_inputs():
    a = gen("high_voltage_electrical_flame",
            perception=(("switch", (0, 0)),), known=frozenset({"switch"}))
    b = gen("high_voltage_electrical_flame",
            perception=(("switch", (0, 0)),), known=frozenset({"switch"}))
    assert a == b


def test_scheme_count_bounds():
    for task_type in ("alkane_gas_flame", "trapped_person", "damaged_tank",
                      "high_voltage_electrical_flame"):
        dags = gen(task_type,
                   perception=tuple((r, (0, 0)) for r in
                                    ("valve", "water", "switch", "foam",
                                     "metal_net", "oxygen",
                                     "activated_carbon", "asbestos_felt")),
                   known=frozenset({"valve", "water", "switch", "foam",
                                    "metal_net", "oxygen", "activated_carbon",
                                    "asbestos_felt"}))
        assert 1 <= len(dags) <= 4


def test_resource_gated_scheme_variants():
    # without a known or explorable switch, only the foam/net route remains
    dags = gen("high_voltage_electrical_flame",
               perception=(("foam", (0, 0)), ("metal_net", (0, 0))),
               known=frozenset({"foam", "metal_net"}))
    assert len(dags) == 1
    assert dags[0].nodes[1].skill == "liquid_spray"


class _BadBackend:
    def complete(self, prompt):
        return "not json at all"


def test_malformed_backend_response_surfaces_raw_text():
    with pytest.raises(BackendError) as err:
        gen("alkane_gas_flame", backend=_BadBackend())
    assert err.value.raw == "not json at all"


def test_parse_schemes_tolerates_nested_object_shape():
    raw = json.dumps({"schemes": {"scheme_1": {"steps": {
        "step_1": {"required_skill": "inspect", "resource": "",
                   "dependency": []},
        "step_2": {"required_skill": "monitor", "resource": "",
                   "dependency": ["step_1"]},
    }}}})
    schemes = parse_schemes(raw)
    assert len(schemes) == 1 and len(schemes[0]) == 2


def test_parse_schemes_missing_required_key():
    raw = json.dumps({"schemes": [{"steps": [{"resource": ""}]}]})
    with pytest.raises(BackendError):
        parse_schemes(raw)


# --- exploration insertion ----------------------------------------------------------

def spray_dag(known=frozenset()):
    nodes = (SubtaskNode(id="t_s0_n1", skill="liquid_spray", robots=1,
                         duration=10.0, resource="water"),)
    return LayeredDag("t", 0, nodes, frozenset(), known)


def test_exploration_inserted_for_missing_water():
    g = insert_exploration(spray_dag(), known=frozenset(), priors={"water": 0.7})
    explorers = [n for n in g.nodes if n.exploration]
    assert len(explorers) == 1
    assert explorers[0].p_success == 0.7
    assert (explorers[0].id, "t_s0_n1") in g.edges
    assert validate_dag(g, frozenset({"liquid_spray", "local_exploration"})) == []


def test_exploration_not_inserted_when_known():
    g = insert_exploration(spray_dag(), known=frozenset({"water"}), priors={})
    assert not any(n.exploration for n in g.nodes)
    assert g.known_resources == frozenset({"water"})


def test_shared_missing_resource_single_explorer_two_edges():
    nodes = (SubtaskNode(id="n1", skill="liquid_spray", robots=1,
                         duration=5.0, resource="water"),
             SubtaskNode(id="n2", skill="liquid_spray", robots=1,
                         duration=5.0, resource="water"))
    g = LayeredDag("t", 0, nodes, frozenset(), frozenset())
    g2 = insert_exploration(g, frozenset(), {"water": 1.0})
    explorers = [n for n in g2.nodes if n.exploration]
    assert len(explorers) == 1
    out_edges = {e for e in g2.edges if e[0] == explorers[0].id}
    assert out_edges == {(explorers[0].id, "n1"), (explorers[0].id, "n2")}


# --- validation ---------------------------------------------------------------------

def test_validate_reports_cycle():
    nodes = (SubtaskNode(id="a", skill="inspect", robots=1, duration=1.0),
             SubtaskNode(id="b", skill="inspect", robots=1, duration=1.0))
    g = LayeredDag("t", 0, nodes, frozenset({("a", "b"), ("b", "a")}),
                   frozenset())
    assert any("cycle" in p for p in validate_dag(g, frozenset({"inspect"})))


def test_validate_reports_unknown_skill():
    g = LayeredDag("t", 0,
                   (SubtaskNode(id="a", skill="fix", robots=1, duration=1.0),),
                   frozenset(), frozenset())
    assert any("unknown skill: fix" in p
               for p in validate_dag(g, frozenset({"inspect"})))


def test_validate_reports_all_violations_not_first():
    nodes = (SubtaskNode(id="a", skill="teleport", robots=1, duration=1.0),
             SubtaskNode(id="b", skill="liquid_spray", robots=1, duration=1.0,
                         resource="water"))
    g = LayeredDag("t", 0, nodes, frozenset(), frozenset())
    problems = validate_dag(g, frozenset({"liquid_spray"}))
    assert len(problems) >= 2


def test_validate_valid_alkane_scheme_ok():
    dags = gen("alkane_gas_flame")
    assert validate_dag(dags[0], frozenset(ALL_CAPS)) == []


# --- http adapter -------------------------------------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        prompt = json.loads(self.rfile.read(length))["prompt"]
        reply = RuleBackend().complete(prompt)
        body = json.dumps({"text": reply}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *a):
        pass


def test_http_backend_round_trip():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        url = f"http://127.0.0.1:{server.server_port}/"
        dags = gen("alkane_gas_flame", backend=HttpBackend(url, timeout=5.0))
        assert len(dags) == 2
    finally:
        server.shutdown()


def test_http_backend_unreachable_raises():
    backend = HttpBackend("http://127.0.0.1:9/", timeout=0.2, retries=0)
    with pytest.raises(BackendError):
        backend.complete("x")
