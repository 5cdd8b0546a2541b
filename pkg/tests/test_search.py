import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmplan.automaton import InfeasibleSpecification, advance, ReachableSet
from swarmplan.ltl import parse_ltl
from swarmplan.search import (GroupProfile, ScheduleInfeasible, SearchContext,
                              SearchParams, TaskSite, candidate_tasks,
                              dominates, evaluate_plans, expand, node_value,
                              schedule_start_times, search, travel_time, _root)
from swarmplan.translate import translate_to_nba

from oracles import random_search_instance, search_optimum


def simple_ctx(formula="<>(a && <> b)", tasks=("a", "b"), groups=1,
               caps=None, **params):
    automata = {"m0": translate_to_nba(parse_ltl(formula))}
    sites = {t: TaskSite(t, (10.0 * (i + 1), 0.0), 4.0)
             for i, t in enumerate(tasks)}
    gs = []
    for gi in range(groups):
        cap = frozenset(caps[gi]) if caps else frozenset(tasks)
        gs.append(GroupProfile(f"g{gi}", (f"r{gi}",), cap, (0.0, 0.0), 2.0))
    return SearchContext(automata=automata, groups=gs, tasks=sites,
                         params=SearchParams(**params))


# --- node_value ----------------------------------------------------------------

def test_node_value_root_distances_only():
    # 2 groups, 3 missions each at distance 3, eta2 = 1
    zeta = (0.0, 0.0, 0.0, 0.0, 3.0, 3.0, 3.0)
    assert node_value(zeta, 2, eta1=0.1, eta2=1.0) == 9.0


def test_node_value_direct_evaluation():
    zeta = (10.0, 7.0, 2.0, 3.0, 1.0, 0.0)
    assert node_value(zeta, 2, eta1=0.1, eta2=5.0) == pytest.approx(15.5)


def test_node_value_infinite_distance():
    zeta = (1.0, 1.0, math.inf)
    assert node_value(zeta, 1, 0.1, 5.0) == math.inf


# --- dominates -------------------------------------------------------------------

def test_dominates_examples():
    assert dominates((1, 2, 3), (1, 2, 4))
    assert not dominates((1, 5), (2, 4))
    assert not dominates((1, 2), (1, 2))
    with pytest.raises(ValueError):
        dominates((1, 2), (1, 2, 3))


@given(st.lists(st.integers(0, 5), min_size=1, max_size=5), st.data())
@settings(max_examples=100, deadline=None)
def test_dominates_strict_and_antisymmetric(z1, data):
    z2 = data.draw(st.lists(st.integers(0, 5), min_size=len(z1),
                            max_size=len(z1)))
    assert not dominates(z1, z1)
    if dominates(z1, z2):
        assert not dominates(z2, z1)


# --- schedule_start_times --------------------------------------------------------

def test_schedule_chain():
    starts, makespans = schedule_start_times(
        {"g": [("a", 2.0), ("b", 3.0), ("c", 4.0)]}, frozenset())
    assert starts == {"a": 0.0, "b": 2.0, "c": 5.0}
    assert makespans["g"] == 9.0


def test_schedule_cross_group_wait():
    starts, makespans = schedule_start_times(
        {"g1": [("up", 5.0)], "g2": [("down", 2.0)]},
        frozenset({("up", "down")}))
    assert starts["down"] == 5.0
    assert makespans == {"g1": 5.0, "g2": 7.0}


def test_schedule_empty():
    starts, makespans = schedule_start_times({"g": []}, frozenset())
    assert starts == {}
    assert makespans["g"] == 0.0


def test_schedule_cycle_infeasible():
    with pytest.raises(ScheduleInfeasible):
        schedule_start_times(
            {"g1": [("a", 1.0)], "g2": [("b", 1.0)]},
            frozenset({("a", "b"), ("b", "a")}))


def test_schedule_duplicate_task_rejected():
    with pytest.raises(ScheduleInfeasible):
        schedule_start_times({"g1": [("a", 1.0)], "g2": [("a", 1.0)]},
                             frozenset())


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_schedule_matches_lp_oracle(data):
    pytest.importorskip("scipy")
    from scipy.optimize import linprog

    n_groups = data.draw(st.integers(1, 2))
    tasks = []
    plans = {}
    for g in range(n_groups):
        chain = []
        for i in range(data.draw(st.integers(0, 3))):
            name = f"g{g}t{i}"
            chain.append((name, float(data.draw(st.integers(1, 9)))))
            tasks.append(name)
        plans[f"g{g}"] = chain
    if len(tasks) < 2:
        prec = frozenset()
    else:
        pairs = data.draw(st.sets(
            st.tuples(st.sampled_from(tasks), st.sampled_from(tasks)),
            max_size=3))
        order = {t: i for i, t in enumerate(tasks)}
        prec = frozenset((a, b) for a, b in pairs if order[a] < order[b])

    # chain order follows task index within a group, so edges are acyclic
    starts, makespans = schedule_start_times(plans, prec)
    if not tasks:
        return
    durations = {t: d for chain in plans.values() for t, d in chain}
    ix = {t: i for i, t in enumerate(tasks)}
    n = len(tasks)
    a_ub, b_ub = [], []

    def edge(u, v):
        row = [0.0] * (n + 1)
        row[ix[u]] = 1.0
        row[ix[v]] = -1.0
        a_ub.append(row)
        b_ub.append(-durations[u])

    for chain in plans.values():
        for (u, _), (v, _) in zip(chain, chain[1:]):
            edge(u, v)
    for u, v in prec:
        edge(u, v)
    for t in tasks:
        row = [0.0] * (n + 1)
        row[ix[t]] = 1.0
        row[-1] = -1.0
        a_ub.append(row)
        b_ub.append(-durations[t])
    c = [0.0] * n + [1.0]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * (n + 1))
    assert res.success
    assert max(makespans.values()) == pytest.approx(res.x[-1], abs=1e-6)


# --- candidates / expand ---------------------------------------------------------

def test_candidate_excludes_incapable_group():
    ctx = simple_ctx(formula="<> a && <> b", caps=[("a",)], groups=1)
    root = _root(ctx)
    assert candidate_tasks(ctx, root, "g0") == ["a"]


def test_candidate_matches_bruteforce_transition_scan():
    ctx = simple_ctx(formula="<>(a && <> b)")
    root = _root(ctx)
    got = candidate_tasks(ctx, root, "g0")
    expected = set()
    for mid in ctx.mission_ids():
        a = ctx.automata[mid]
        for sym in a.alphabet & ctx.groups[0].capabilities:
            for q in root.reachable[ctx.mission_ids().index(mid)]:
                for guard, dst in a.successors(q):
                    if guard.satisfied_by(frozenset([sym])):
                        expected.add(sym)
    assert set(got) == expected


def test_expand_appends_and_advances():
    ctx = simple_ctx(formula="<>(a && <> b)")
    root = _root(ctx)
    child, status = expand(ctx, root, "g0", "a", creation=1)
    assert status == "kept"
    assert [it.task for it in child.plans[0]] == ["a"]
    a = ctx.automata["m0"]
    expected = a.step(a.initial, frozenset(["a"]))
    assert child.reachable[0] == expected


def test_expand_dead_end_discarded():
    ctx = simple_ctx(formula="(! b) U a && <> b", tasks=("a", "b"))
    root = _root(ctx)
    child, status = expand(ctx, root, "g0", "b", creation=1)
    assert child is None and status == "dead_end"


def test_expand_profile_matches_manual_recomputation():
    ctx = simple_ctx(formula="<> a && <> b", tasks=("a", "b"))
    root = _root(ctx)
    child, _ = expand(ctx, root, "g0", "a", creation=1)
    g = ctx.groups[0]
    dur = ctx.tasks["a"].duration + travel_time(g.home, ctx.tasks["a"].position,
                                                g.velocity)
    assert child.zeta[0] == pytest.approx(dur)  # T_g0
    assert child.zeta[1] == pytest.approx(dur)  # C_g0
    # the conjunction mission still needs b: one hop to acceptance
    assert list(child.zeta[2:]) == [1.0]


# --- search ----------------------------------------------------------------------

def test_search_forced_order_single_group():
    ctx = simple_ctx(formula="<>(a && <> b)")
    res = search(ctx)
    assert res.complete
    assert [it.task for it in res.plans["g0"]] == ["a", "b"]


def test_search_infeasible_mission_rejected():
    ctx = simple_ctx(formula="a && ! a", tasks=("a",))
    with pytest.raises(InfeasibleSpecification):
        search(ctx)


def test_search_budget_exhaustion_flags_incomplete():
    ctx = simple_ctx(formula="<>(a && <> b)", budget=1)
    res = search(ctx)
    assert not res.complete


def test_search_matches_bruteforce_on_random_instances():
    for seed in range(12):
        ctx = random_search_instance(seed)
        res = search(ctx)
        opt = search_optimum(ctx)
        assert res.complete, f"seed {seed} returned incomplete"
        assert res.chi == opt, f"seed {seed}: {res.chi} != {opt}"


def test_search_deterministic():
    ctx1 = random_search_instance(3)
    ctx2 = random_search_instance(3)
    r1, r2 = search(ctx1), search(ctx2)
    assert r1.chi == r2.chi
    assert r1.task_sequence == r2.task_sequence
    assert [(t.creation, t.status) for t in r1.trace] == \
        [(t.creation, t.status) for t in r2.trace]


def test_search_anytime_incumbent_nonincreasing():
    for seed in (0, 5, 9):
        res = search(random_search_instance(seed))
        hist = res.incumbent_history
        assert all(a >= b for a, b in zip(hist, hist[1:]))


def test_search_frontier_invariant_checked():
    ctx = random_search_instance(7)
    ctx.params = SearchParams(check_invariants=True)
    search(ctx)  # internal assertions active


def test_search_dominated_nodes_have_live_dominators():
    res = search(random_search_instance(11))
    by_creation = {t.creation: t for t in res.trace if t.status == "kept"}
    for rec in res.trace:
        if rec.status == "dominated":
            assert rec.dominator is not None
            dom = by_creation.get(rec.dominator)
            if dom is not None:
                assert all(a <= b for a, b in zip(dom.zeta, rec.zeta))


def test_search_incumbent_replay_reaches_acceptance():
    for seed in (1, 4, 8):
        ctx = random_search_instance(seed)
        res = search(ctx)
        assert res.complete
        for mid in ctx.mission_ids():
            a = ctx.automata[mid]
            r = ReachableSet.initial(mid, a)
            for _, task in res.task_sequence:
                r = advance(a, r, frozenset([task]))
                assert r.states, "replay must never die"
            assert r.states & a.accepting
