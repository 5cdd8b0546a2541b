import math
import random

import pytest

from swarmplan.scheduler import (Assignment, Infeasible, RobotSpec,
                                 SchedInstance, SchemeSelectionError,
                                 SubtaskSpec, build_instance, select_scheme,
                                 solve, verify)
from swarmplan.subtasks import LayeredDag, SubtaskNode

from oracles import schedule_optimum


def robot(rid, skills, pos=(0.0, 0.0), avail=0.0):
    return RobotSpec(rid, frozenset(skills), 2.0, pos, avail)


def inst_of(subs, prec=(), robots=(), eps=0.3, now=0.0, ext=()):
    return SchedInstance(
        subtasks=tuple(subs), precedence=frozenset(prec),
        robots=tuple(robots), eps=eps, now=now,
        big_m=now + sum(s.duration for s in subs) + 100.0,
        external_finish=tuple(ext))


def random_instance(seed, max_subtasks=8, max_robots=3):
    """Random feasible-capability instance for the exactness corpus."""
    rng = random.Random(seed)
    n = rng.randint(2, max_subtasks)
    m = rng.randint(1, max_robots)
    skills = ["s_a", "s_b", "s_c"][:rng.randint(1, 3)]
    robots = [robot(f"r{i}", rng.sample(skills, rng.randint(1, len(skills))))
              for i in range(m)]
    subs = []
    for i in range(n):
        skill = rng.choice(skills)
        pool = [r for r in robots if skill in r.skills]
        if not pool:
            # give a random robot the skill to keep capability feasible
            j = rng.randrange(m)
            robots[j] = robot(f"r{j}", set(robots[j].skills) | {skill})
            pool = [robots[j]]
        count = 1
        if len(pool) >= 2 and rng.random() < 0.25:
            count = 2
        subs.append(SubtaskSpec(f"u{i}", skill, count,
                                float(rng.randint(2, 9)),
                                p_success=1.0 if rng.random() < 0.8 else 0.95))
    # denser precedence for larger instances keeps enumeration tractable
    density = 0.25 if n <= 5 else 0.5
    prec = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                prec.add((f"u{i}", f"u{j}"))
    return inst_of(subs, prec, robots, eps=0.5)


# --- solve examples --------------------------------------------------------------

def test_two_independent_subtasks_two_robots_parallel():
    subs = [SubtaskSpec("a", "s", 1, 5.0), SubtaskSpec("b", "s", 1, 5.0)]
    a = solve(inst_of(subs, robots=[robot("r1", {"s"}), robot("r2", {"s"})]))
    assert a.makespan == 5.0
    starts = a.start_map()
    assert starts["a"] == 0.0 and starts["b"] == 0.0
    assert verify(inst_of(subs, robots=[robot("r1", {"s"}),
                                        robot("r2", {"s"})]), a) == []


def test_chain_on_single_robot():
    subs = [SubtaskSpec("a", "s", 1, 4.0), SubtaskSpec("b", "s", 1, 3.0)]
    inst = inst_of(subs, prec={("a", "b")}, robots=[robot("r1", {"s"})])
    a = solve(inst)
    starts = a.start_map()
    assert starts["b"] == starts["a"] + 4.0
    assert a.makespan == 7.0
    assert verify(inst, a) == []


def test_synchronized_multi_robot_subtask():
    subs = [SubtaskSpec("duo", "s", 2, 6.0)]
    inst = inst_of(subs, robots=[robot("r1", {"s"}), robot("r2", {"s"})])
    a = solve(inst)
    assert a.binding_map()["duo"] == ("r1", "r2")
    assert a.makespan == 6.0


def test_capability_infeasibility_names_skill():
    subs = [SubtaskSpec("f", "fix", 1, 5.0)]
    with pytest.raises(Infeasible) as err:
        solve(inst_of(subs, robots=[robot("r1", {"inspect"})]))
    assert err.value.constraint == "capability"
    assert "fix" in err.value.detail


def test_risk_budget_infeasibility():
    subs = [SubtaskSpec("x", "s", 1, 5.0, p_success=0.6)]
    with pytest.raises(Infeasible) as err:
        solve(inst_of(subs, robots=[robot("r1", {"s"})], eps=0.3))
    assert err.value.constraint == "risk"


def test_start_times_respect_decision_time():
    subs = [SubtaskSpec("a", "s", 1, 2.0)]
    inst = inst_of(subs, robots=[robot("r1", {"s"})], now=50.0)
    a = solve(inst)
    assert a.start_map()["a"] == 50.0
    assert verify(inst, a) == []


def test_external_predecessor_finish_respected():
    subs = [SubtaskSpec("b", "s", 1, 3.0)]
    inst = inst_of(subs, prec={("frozen_a", "b")},
                   robots=[robot("r1", {"s"})], ext=[("frozen_a", 12.0)])
    a = solve(inst)
    assert a.start_map()["b"] == 12.0


def test_solve_deterministic():
    inst = random_instance(5)
    a1, a2 = solve(inst), solve(inst)
    assert a1 == a2


def test_solve_matches_bruteforce_oracle():
    for seed in range(10):
        inst = random_instance(seed)
        a = solve(inst)
        opt = schedule_optimum(inst)
        assert a.makespan == pytest.approx(opt, abs=1e-9), f"seed {seed}"
        assert verify(inst, a) == [], f"seed {seed}"


# --- verify ----------------------------------------------------------------------

def test_verify_flags_overlap():
    subs = [SubtaskSpec("a", "s", 1, 5.0), SubtaskSpec("b", "s", 1, 5.0)]
    inst = inst_of(subs, robots=[robot("r1", {"s"})])
    bad = Assignment(
        binding=(("a", ("r1",)), ("b", ("r1",))),
        sequencing=(("r1", ("a", "b")),),
        starts=(("a", 0.0), ("b", 2.0)),
        makespan=7.0)
    problems = verify(inst, bad)
    assert any(p.startswith("S22 overlap") for p in problems)


def test_verify_flags_risk():
    subs = [SubtaskSpec("a", "s", 1, 5.0, p_success=0.7)]
    inst = inst_of(subs, robots=[robot("r1", {"s"})], eps=0.2)
    bad = Assignment(binding=(("a", ("r1",)),), sequencing=(("r1", ("a",)),),
                     starts=(("a", 0.0),), makespan=5.0)
    problems = verify(inst, bad)
    assert any(p.startswith("S23 budget") for p in problems)


def test_verify_flags_capability_and_precedence():
    subs = [SubtaskSpec("a", "weld", 1, 2.0), SubtaskSpec("b", "weld", 1, 2.0)]
    inst = inst_of(subs, prec={("a", "b")},
                   robots=[robot("r1", {"weld"}), robot("r2", {"paint"})])
    bad = Assignment(
        binding=(("a", ("r1",)), ("b", ("r2",))),
        sequencing=(("r1", ("a",)), ("r2", ("b",))),
        starts=(("a", 0.0), ("b", 1.0)),
        makespan=3.0)
    problems = verify(inst, bad)
    assert any(p.startswith("S20") for p in problems)
    assert any(p.startswith("S21") for p in problems)


def test_verify_accepts_solver_output():
    inst = random_instance(3)
    assert verify(inst, solve(inst)) == []


# --- build_instance ---------------------------------------------------------------

def _dag(nodes, edges, task="t", known=frozenset()):
    return LayeredDag(task, 0, tuple(nodes), frozenset(edges), known)


def test_build_instance_travel_plus_service():
    node = SubtaskNode(id="t_s0_n1", skill="inspect", robots=1, duration=5.0)
    dag = _dag([node], [])
    inst = build_instance(
        [dag], [robot("r1", {"inspect"}, pos=(10.0, 0.0))],
        {"t_s0_n1": (0.0, 0.0)}, eps=0.3, now=0.0)
    # 10 m at 2 m/s plus 5 s service
    assert inst.subtasks[0].duration == 10.0


def test_build_instance_missing_skill_names_it():
    node = SubtaskNode(id="n1", skill="fix", robots=1, duration=5.0)
    with pytest.raises(Infeasible) as err:
        build_instance([_dag([node], [])], [robot("r1", {"inspect"})],
                       {}, eps=0.3, now=0.0)
    assert "fix" in err.value.detail


def test_build_instance_empty_dags():
    inst = build_instance([], [robot("r1", {"inspect"})], {}, eps=0.3, now=0.0)
    a = solve(inst)
    assert a.makespan == 0.0
    assert verify(inst, a) == []


# --- scheme selection ---------------------------------------------------------------

def test_select_scheme_prefers_lower_makespan():
    fast = _dag([SubtaskNode(id="f1", skill="s", robots=1, duration=5.0)], [],
                task="fast")
    slow = _dag([SubtaskNode(id="s1", skill="s", robots=1, duration=9.0)], [],
                task="slow")

    def build(dag):
        return build_instance([dag], [robot("r1", {"s"})], {}, 0.3, 0.0)

    ix, dag, assignment = select_scheme([slow, fast], build)
    assert ix == 1 and dag.task == "fast"
    assert assignment.makespan == 5.0


def test_select_scheme_single_candidate():
    only = _dag([SubtaskNode(id="n1", skill="s", robots=1, duration=5.0)], [])
    ix, dag, _ = select_scheme(
        [only], lambda d: build_instance([d], [robot("r1", {"s"})], {}, 0.3, 0.0))
    assert ix == 0


def test_select_scheme_risky_exploration_falls_back():
    # metal-net scheme needs exploration with low prior; water scheme is sure
    risky = _dag([SubtaskNode(id="e1", skill="local_exploration", robots=1,
                              duration=8.0, resource="metal_net",
                              p_success=0.4, exploration=True),
                  SubtaskNode(id="m1", skill="lay", robots=1, duration=5.0,
                              resource="metal_net")],
                 [("e1", "m1")], task="risky")
    sure = _dag([SubtaskNode(id="w1", skill="liquid_spray", robots=1,
                             duration=9.0, resource="water")], [],
                task="sure", known=frozenset({"water"}))
    bots = [robot("r1", {"local_exploration", "lay", "liquid_spray"})]

    def build(dag):
        return build_instance([dag], bots, {}, eps=0.3, now=0.0)

    ix, dag, _ = select_scheme([risky, sure], build)
    assert dag.task == "sure"


def test_select_scheme_all_infeasible_reports_certificates():
    impossible = _dag([SubtaskNode(id="x1", skill="fix", robots=1,
                                   duration=4.0)], [])
    with pytest.raises(SchemeSelectionError) as err:
        select_scheme(
            [impossible],
            lambda d: build_instance([d], [robot("r1", {"s"})], {}, 0.3, 0.0))
    assert err.value.certificates
    assert "capability" in err.value.certificates[0][1]


def test_tie_break_prefers_first_candidate():
    a1 = _dag([SubtaskNode(id="a1", skill="s", robots=1, duration=5.0)], [],
              task="first")
    a2 = _dag([SubtaskNode(id="a2", skill="s", robots=1, duration=5.0)], [],
              task="second")
    ix, dag, _ = select_scheme(
        [a1, a2],
        lambda d: build_instance([d], [robot("r1", {"s"})], {}, 0.3, 0.0))
    assert ix == 0 and dag.task == "first"


# --- rolling dispatch -----------------------------------------------------------

from swarmplan.scheduler import RollingDispatcher  # noqa: E402


def chain_dag(n=6, task="t", skill="s"):
    nodes = [SubtaskNode(id=f"{task}_n{i}", skill=skill, robots=1,
                         duration=4.0) for i in range(n)]
    edges = {(f"{task}_n{i}", f"{task}_n{i+1}") for i in range(n - 1)}
    return LayeredDag(task, 0, tuple(nodes), frozenset(edges), frozenset())


def test_dispatch_empty_window_no_solver_call():
    disp = RollingDispatcher(chain_dag(2), eps=0.3)
    for n in ("t_n0", "t_n1"):
        disp.on_completed(n, 1.0)
    assert disp.dispatch(2.0, [robot("r1", {"s"})], {}) == []
    assert disp.solve_calls == 0


def test_dispatch_batch_limit():
    nodes = [SubtaskNode(id=f"p{i}", skill="s", robots=1, duration=2.0)
             for i in range(20)]
    dag = LayeredDag("wide", 0, tuple(nodes), frozenset(), frozenset())
    disp = RollingDispatcher(dag, eps=0.3, batch_size=16)
    items = disp.dispatch(0.0, [robot("r1", {"s"}), robot("r2", {"s"})], {})
    assert len(items) == 16


def test_dispatch_resolve_counter():
    disp = RollingDispatcher(chain_dag(6), eps=0.3, resolve_after=4)
    disp.dispatch(0.0, [robot("r1", {"s"})], {})
    assert not disp.should_resolve()
    for i in range(4):
        disp.on_completed(f"t_n{i}", float(i))
    assert disp.should_resolve()
    disp.dispatch(4.0, [robot("r1", {"s"})], {})
    assert disp.completions_since_solve == 0


def test_dispatch_frozen_running_subtask_keeps_start_and_robot():
    dag = chain_dag(3)
    disp = RollingDispatcher(dag, eps=0.3)
    first = disp.dispatch(0.0, [robot("r1", {"s"}), robot("r2", {"s"})], {})
    lead = first[0]
    disp.on_started(lead.node.id, lead.robots, 0.0, 4.0)
    items = disp.dispatch(1.0, [robot("r1", {"s"}), robot("r2", {"s"})], {})
    # running head is not re-dispatched; successor waits for its frozen end
    assert all(it.node.id != lead.node.id for it in items)
    nxt = [it for it in items if it.node.id == "t_n1"][0]
    assert nxt.start >= 4.0
    assert disp.running[lead.node.id][1] == 0.0  # recorded start unchanged


def test_dispatch_failed_robot_excluded():
    dag = chain_dag(4)
    disp = RollingDispatcher(dag, eps=0.3)
    disp.dispatch(0.0, [robot("r1", {"s"}), robot("r2", {"s"})], {})
    disp.on_robot_failed("r1")
    items = disp.dispatch(1.0, [robot("r1", {"s"}), robot("r2", {"s"})], {})
    assert items, "remaining robot takes over"
    assert all("r1" not in it.robots for it in items)


def test_dispatch_aborted_subtask_reenters_pool():
    dag = chain_dag(3)
    disp = RollingDispatcher(dag, eps=0.3)
    items = disp.dispatch(0.0, [robot("r1", {"s"})], {})
    head = items[0]
    disp.on_started(head.node.id, head.robots, 0.0, 4.0)
    disp.on_robot_failed("r1")
    assert head.node.id in disp.pending_ids()


def test_dispatch_pinned_binding():
    nodes = [SubtaskNode(id="fetch", skill="s", robots=1, duration=3.0)]
    dag = LayeredDag("t", 0, tuple(nodes), frozenset(), frozenset())
    disp = RollingDispatcher(dag, eps=0.3)
    items = disp.dispatch(0.0, [robot("r1", {"s"}, pos=(0.0, 0.0)),
                                robot("r2", {"s"}, pos=(40.0, 0.0))],
                          {"fetch": (0.0, 0.0)}, pinned={"fetch": "r2"})
    assert items[0].robots == ("r2",)
