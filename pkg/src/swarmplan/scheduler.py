"""Exact subtask assignment under an uncertainty budget, dispatched rolling.

The assignment model minimizes local makespan subject to capability,
precedence, per-robot non-overlap, sequence-consistency, and a risk budget
bounding the summed failure probabilities of assigned subtasks.  It is solved
exactly by a chronological branch-and-bound over (subtask, robot-set) choices
with critical-path and workload bounds plus Pareto state dominance; an
independent verifier re-checks every constraint family on the result.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .subtasks import LayeredDag, SubtaskNode


class Infeasible(ValueError):
    """Instance admits no assignment; names the binding constraint class."""

    def __init__(self, constraint: str, detail: str):
        super().__init__(f"{constraint}: {detail}")
        self.constraint = constraint
        self.detail = detail


@dataclass(frozen=True)
class RobotSpec:
    id: str
    skills: frozenset[str]
    velocity: float = 2.0
    position: tuple[float, float] = (0.0, 0.0)
    available_from: float = 0.0


@dataclass(frozen=True)
class SubtaskSpec:
    id: str
    skill: str
    robots: int
    duration: float  # service plus staging travel estimate
    p_success: float = 1.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError(f"subtask {self.id} needs positive duration")


@dataclass(frozen=True)
class SchedInstance:
    subtasks: tuple[SubtaskSpec, ...]
    precedence: frozenset[tuple[str, str]]
    robots: tuple[RobotSpec, ...]
    eps: float
    now: float
    big_m: float
    external_finish: tuple[tuple[str, float], ...] = ()  # completed/frozen preds
    pinned: tuple[tuple[str, str], ...] = ()  # (subtask, robot) must-include

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError("uncertainty budget must lie in (0, 1)")
        ids = {s.id for s in self.subtasks}
        ext = {k for k, _ in self.external_finish}
        for up, down in self.precedence:
            if down not in ids:
                raise ValueError(f"precedence into unknown subtask {down}")
            if up not in ids and up not in ext:
                raise ValueError(f"precedence from unknown subtask {up}")
        if _cyclic(ids, self.precedence):
            raise ValueError("precedence must be acyclic")

    def pins_for(self, sid: str) -> frozenset[str]:
        return frozenset(r for s, r in self.pinned if s == sid)


def _cyclic(ids, pairs) -> bool:
    adj: dict[str, list[str]] = {i: [] for i in ids}
    for a, b in pairs:
        if a in adj and b in adj:
            adj[a].append(b)
    color: dict[str, int] = {}

    def dfs(n):
        color[n] = 1
        for m in adj[n]:
            c = color.get(m, 0)
            if c == 1 or (c == 0 and dfs(m)):
                return True
        color[n] = 2
        return False

    return any(color.get(n, 0) == 0 and dfs(n) for n in sorted(adj))


@dataclass(frozen=True)
class Assignment:
    binding: tuple[tuple[str, tuple[str, ...]], ...]  # subtask -> robot set
    sequencing: tuple[tuple[str, tuple[str, ...]], ...]  # robot -> chain
    starts: tuple[tuple[str, float], ...]
    makespan: float
    optimal: bool = True

    def binding_map(self) -> dict[str, tuple[str, ...]]:
        return dict(self.binding)

    def start_map(self) -> dict[str, float]:
        return dict(self.starts)

    def chains(self) -> dict[str, tuple[str, ...]]:
        return dict(self.sequencing)

    def consecutive_pairs(self) -> list[tuple[str, str, str]]:
        """(robot, earlier, later) y-pairs implied by the per-robot chains."""
        out = []
        for robot, chain in self.sequencing:
            for a, b in zip(chain, chain[1:]):
                out.append((robot, a, b))
        return out


def travel_estimate(work_pos: tuple[float, float],
                    robots: list[RobotSpec]) -> float:
    """Conservative staging estimate: the slowest capable robot's approach."""
    if not robots:
        return 0.0
    return max(math.dist(r.position, work_pos) / r.velocity for r in robots)


def build_instance(dags: list[LayeredDag],
                   robots: list[RobotSpec],
                   work_positions: dict[str, tuple[float, float]],
                   eps: float, now: float,
                   external_finish: Optional[dict[str, float]] = None,
                   eligible: Optional[set[str]] = None,
                   pinned: Optional[dict[str, str]] = None) -> SchedInstance:
    """Assemble a solver instance from selected subtask graphs.

    Durations are the node service times plus the staging travel estimate for
    the node's work position.  ``eligible`` restricts to a rolling window;
    ``external_finish`` carries completion times of already-handled
    predecessors.
    """
    if not robots:
        raise Infeasible("capability", "group has no robots")
    specs: list[SubtaskSpec] = []
    pairs: set[tuple[str, str]] = set()
    ext = dict(external_finish or {})
    for dag in dags:
        for node in dag.nodes:
            if eligible is not None and node.id not in eligible:
                continue
            capable = [r for r in robots if node.skill in r.skills]
            if len(capable) < node.robots:
                raise Infeasible(
                    "capability",
                    f"skill {node.skill} needs {node.robots} robots, "
                    f"{len(capable)} available")
            travel = travel_estimate(
                work_positions.get(node.id, (0.0, 0.0)), capable)
            specs.append(SubtaskSpec(
                id=node.id, skill=node.skill, robots=node.robots,
                duration=node.duration + travel, p_success=node.p_success))
        ids_here = {s.id for s in specs}
        for up, down in dag.edges:
            if down in ids_here and (up in ids_here or up in ext):
                pairs.add((up, down))
    total = sum(s.duration for s in specs)
    max_travel = 0.0
    positions = [r.position for r in robots] + list(work_positions.values())
    for a, b in itertools.combinations(positions, 2):
        max_travel = max(max_travel, math.dist(a, b) / min(
            r.velocity for r in robots))
    big_m = now + total + max_travel
    ids_present = {s.id for s in specs}
    pins = tuple(sorted((s, r) for s, r in (pinned or {}).items()
                        if s in ids_present))
    return SchedInstance(
        subtasks=tuple(sorted(specs, key=lambda s: s.id)),
        precedence=frozenset(pairs),
        robots=tuple(sorted(robots, key=lambda r: r.id)),
        eps=eps, now=now, big_m=big_m,
        external_finish=tuple(sorted(ext.items())), pinned=pins)


@dataclass
class _SolveState:
    finish: dict[str, float]
    free: dict[str, float]
    done: frozenset[str]
    makespan: float
    binding: dict[str, tuple[str, ...]]
    chains: dict[str, list[str]]
    starts: dict[str, float]


def solve(inst: SchedInstance, node_budget: int = 200000) -> Assignment:
    """Exact minimum-makespan assignment; deterministic branch order.

    Raises :class:`Infeasible` with the binding constraint class when no
    assignment exists; returns a suboptimal incumbent flagged ``optimal=False``
    only when the node budget is exhausted.
    """
    subtasks = {s.id: s for s in inst.subtasks}
    if not subtasks:
        return Assignment((), tuple((r.id, ()) for r in inst.robots), (),
                          inst.now, True)
    risk = sum((1.0 - s.p_success) * s.robots for s in inst.subtasks)
    if risk > inst.eps + 1e-12:
        raise Infeasible(
            "risk", f"summed failure mass {risk:.3f} exceeds budget {inst.eps}")
    capable: dict[str, list[str]] = {}
    for s in inst.subtasks:
        pool = [r.id for r in inst.robots if s.skill in r.skills]
        if len(pool) < s.robots:
            raise Infeasible(
                "capability",
                f"skill {s.skill} needs {s.robots} robots, {len(pool)} capable")
        pins = inst.pins_for(s.id)
        if pins - set(pool):
            raise Infeasible(
                "capability",
                f"pinned robots {sorted(pins - set(pool))} cannot run "
                f"{s.skill}")
        if len(pins) > s.robots:
            raise Infeasible(
                "capability", f"{s.id} pinned to more robots than it needs")
        capable[s.id] = pool

    preds: dict[str, list[str]] = {s.id: [] for s in inst.subtasks}
    succs: dict[str, list[str]] = {s.id: [] for s in inst.subtasks}
    ext = dict(inst.external_finish)
    for up, down in sorted(inst.precedence):
        if up in subtasks:
            preds[down].append(up)
            succs[up].append(down)
        else:
            preds[down].append(up)  # external; finish known

    # critical path tail: duration to the end of the graph from each node
    tail: dict[str, float] = {}
    for sid in reversed(_topo_order(subtasks, preds)):
        tail[sid] = subtasks[sid].duration + max(
            (tail[d] for d in succs[sid]), default=0.0)

    order_ids = sorted(subtasks)
    best: dict = {"makespan": math.inf, "state": None}
    nodes_used = [0]
    # Pareto memo per completed set: (sorted relevant finishes, robot frees)
    memo: dict[frozenset[str], list[tuple[tuple[float, ...], float]]] = {}

    robots_free0 = {r.id: max(inst.now, r.available_from) for r in inst.robots}
    workload = sum(s.duration * s.robots for s in inst.subtasks)

    def lower_bound(state: _SolveState) -> float:
        lb = state.makespan
        est: dict[str, float] = {}
        for sid in _topo_order(subtasks, preds):
            if sid in state.done:
                continue
            ready = inst.now
            for p in preds[sid]:
                if p in state.done:
                    ready = max(ready, state.finish[p])
                elif p in ext:
                    ready = max(ready, ext[p])
                else:
                    ready = max(ready, est.get(p, inst.now) + subtasks[p].duration)
            est[sid] = ready
            lb = max(lb, ready + tail[sid])
        remaining = sum(subtasks[sid].duration * subtasks[sid].robots
                        for sid in order_ids if sid not in state.done)
        if remaining > 0 and state.free:
            lb = max(lb, (sum(state.free.values()) + remaining)
                     / len(state.free))
        return lb

    def dominated(state: _SolveState) -> bool:
        relevant = tuple(state.finish[sid] for sid in order_ids
                         if sid in state.done and
                         any(d not in state.done for d in succs[sid]))
        frees = tuple(state.free[r.id] for r in inst.robots)
        key = state.done
        vec = relevant + frees
        entries = memo.setdefault(key, [])
        for old_vec, old_mk in entries:
            if old_mk <= state.makespan and all(
                    a <= b for a, b in zip(old_vec, vec)):
                return True
        entries[:] = [(v, m) for v, m in entries
                      if not (state.makespan <= m
                              and all(a <= b for a, b in zip(vec, v)))]
        entries.append((vec, state.makespan))
        return False

    def recurse(state: _SolveState) -> None:
        if nodes_used[0] > node_budget:
            return
        nodes_used[0] += 1
        if len(state.done) == len(order_ids):
            if state.makespan < best["makespan"]:
                best["makespan"] = state.makespan
                best["state"] = _SolveState(
                    dict(state.finish), dict(state.free), state.done,
                    state.makespan, dict(state.binding),
                    {r: list(c) for r, c in state.chains.items()},
                    dict(state.starts))
            return
        if lower_bound(state) >= best["makespan"]:
            return
        if dominated(state):
            return
        ready = []
        for sid in order_ids:
            if sid in state.done:
                continue
            ok = True
            ready_at = inst.now
            for p in preds[sid]:
                if p in state.done:
                    ready_at = max(ready_at, state.finish[p])
                elif p in ext:
                    ready_at = max(ready_at, ext[p])
                else:
                    ok = False
                    break
            if ok:
                ready.append((ready_at, sid))
        ready.sort(key=lambda t: (t[0], t[1]))
        for ready_at, sid in ready:
            sub = subtasks[sid]
            pins = inst.pins_for(sid)
            for combo in itertools.combinations(capable[sid], sub.robots):
                if pins and not pins <= set(combo):
                    continue
                start = max([ready_at] + [state.free[r] for r in combo])
                end = start + sub.duration
                new_free = dict(state.free)
                new_chains = {r: list(c) for r, c in state.chains.items()}
                for r in combo:
                    new_free[r] = end
                    new_chains[r].append(sid)
                new_finish = dict(state.finish)
                new_finish[sid] = end
                new_starts = dict(state.starts)
                new_starts[sid] = start
                new_binding = dict(state.binding)
                new_binding[sid] = combo
                recurse(_SolveState(
                    new_finish, new_free, state.done | {sid},
                    max(state.makespan, end), new_binding, new_chains,
                    new_starts))

    initial = _SolveState({}, dict(robots_free0), frozenset(), inst.now,
                          {}, {r.id: [] for r in inst.robots}, {})
    recurse(initial)
    if best["state"] is None:
        raise Infeasible("precedence", "no feasible completion found")
    final: _SolveState = best["state"]
    return Assignment(
        binding=tuple(sorted((sid, tuple(rs))
                             for sid, rs in final.binding.items())),
        sequencing=tuple(sorted((r, tuple(c))
                                for r, c in final.chains.items())),
        starts=tuple(sorted(final.starts.items())),
        makespan=final.makespan,
        optimal=nodes_used[0] <= node_budget,
    )


def _topo_order(subtasks, preds) -> list[str]:
    indeg = {sid: sum(1 for p in preds[sid] if p in subtasks)
             for sid in subtasks}
    ready = sorted(sid for sid, d in indeg.items() if d == 0)
    out = []
    succ: dict[str, list[str]] = {sid: [] for sid in subtasks}
    for sid, ps in preds.items():
        for p in ps:
            if p in subtasks:
                succ[p].append(sid)
    while ready:
        sid = ready.pop(0)
        out.append(sid)
        for d in sorted(succ[sid]):
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
        ready.sort()
    return out


_EPS = 1e-9


def verify(inst: SchedInstance, a: Assignment) -> list[str]:
    """Independent arithmetic check of every constraint family.

    Returns all violations; an empty list certifies the assignment.  Run in
    tests against the oracle and at runtime before dispatch.
    """
    problems: list[str] = []
    subtasks = {s.id: s for s in inst.subtasks}
    robots = {r.id: r for r in inst.robots}
    binding = a.binding_map()
    starts = a.start_map()
    chains = a.chains()
    ext = dict(inst.external_finish)

    for sid, sub in subtasks.items():
        assigned = binding.get(sid, ())
        if len(assigned) != sub.robots or len(set(assigned)) != len(assigned):
            problems.append(f"S19 binding: {sid} has {len(assigned)} robots, "
                            f"needs {sub.robots}")
        for r in assigned:
            if r not in robots:
                problems.append(f"S20 capability: {sid} on unknown robot {r}")
            elif sub.skill not in robots[r].skills:
                problems.append(f"S20 capability: {r} lacks {sub.skill}")
        if sid not in starts:
            problems.append(f"S27 domain: {sid} has no start time")
    for sid, start in starts.items():
        if start < inst.now - _EPS:
            problems.append(f"S26 start: {sid} starts at {start} before "
                            f"decision time {inst.now}")
        if start < -_EPS:
            problems.append(f"S27 domain: negative start for {sid}")
    for up, down in sorted(inst.precedence):
        if down not in starts:
            continue
        up_end = (starts[up] + subtasks[up].duration if up in subtasks
                  and up in starts else ext.get(up))
        if up_end is None:
            problems.append(f"S21 precedence: {up} unresolved for {down}")
        elif starts[down] < up_end - _EPS:
            problems.append(f"S21 precedence: {down} starts before {up} ends")
    # per-robot chains: S22 overlap, S24 single chain, S25 antisymmetry
    seen_pairs = set()
    for robot, chain in chains.items():
        intervals = []
        for sid in chain:
            if sid not in subtasks:
                problems.append(f"S24 chain: {robot} lists unknown {sid}")
                continue
            if robot not in binding.get(sid, ()):
                problems.append(f"S24 chain: {robot} runs unassigned {sid}")
            s0 = starts.get(sid, 0.0)
            intervals.append((s0, s0 + subtasks[sid].duration, sid))
        for (s1, e1, i1), (s2, e2, i2) in zip(intervals, intervals[1:]):
            if s2 < e1 - _EPS:
                problems.append(f"S22 overlap: {robot} runs {i1} and {i2} "
                                "concurrently")
        for a1, b1 in zip(chain, chain[1:]):
            if (robot, b1, a1) in seen_pairs:
                problems.append(f"S25 antisymmetry: {a1}/{b1} on {robot}")
            seen_pairs.add((robot, a1, b1))
    for sid, assigned in binding.items():
        for r in assigned:
            if sid not in chains.get(r, ()):
                problems.append(f"S24 chain: {sid} missing from {r} sequence")
    risk = sum((1.0 - subtasks[sid].p_success) * len(binding.get(sid, ()))
               for sid in subtasks)
    if risk > inst.eps + 1e-12:
        problems.append(f"S23 budget: risk {risk:.3f} over {inst.eps}")
    finishes = [starts[sid] + subtasks[sid].duration
                for sid in subtasks if sid in starts]
    if finishes and a.makespan + _EPS < max(finishes):
        problems.append("S18 objective: reported makespan below latest finish")
    for sid in starts:
        if starts[sid] > inst.big_m + _EPS:
            problems.append(f"big-M horizon exceeded by {sid}")
    return problems


@dataclass(frozen=True)
class DispatchItem:
    node: SubtaskNode
    robots: tuple[str, ...]
    start: float
    end_estimate: float


class RollingDispatcher:
    """Rolling-horizon dispatch over one selected subtask graph.

    Re-solves the assignment over the currently eligible window when enough
    completions accumulate or an adaptation event demands it.  Subtasks that
    already started stay frozen: they enter new models only as fixed finish
    times and robot availability, never as decision variables.
    """

    def __init__(self, dag: LayeredDag, eps: float,
                 batch_size: int = 16, resolve_after: int = 4):
        self.dag = dag
        self.eps = eps
        self.batch_size = batch_size
        self.resolve_after = resolve_after
        self.completed: dict[str, float] = {}
        self.running: dict[str, tuple[tuple[str, ...], float, float]] = {}
        self.failed_robots: set[str] = set()
        self.completions_since_solve = 0
        self.solve_calls = 0
        self.last_solve_seconds = 0.0

    # -- execution feedback -------------------------------------------------
    def on_started(self, node_id: str, robots: tuple[str, ...],
                   start: float, end_estimate: float) -> None:
        self.running[node_id] = (robots, start, end_estimate)

    def on_completed(self, node_id: str, time: float) -> None:
        self.running.pop(node_id, None)
        self.completed[node_id] = time
        self.completions_since_solve += 1

    def on_robot_failed(self, robot_id: str) -> None:
        """Abort the robot's running work; its subtasks re-enter the pool."""
        self.failed_robots.add(robot_id)
        for node_id, (robots, _, _) in list(self.running.items()):
            if robot_id in robots:
                del self.running[node_id]

    def pending_ids(self) -> list[str]:
        return [n.id for n in self.dag.nodes
                if n.id not in self.completed and n.id not in self.running]

    def finished(self) -> bool:
        return len(self.completed) == len(self.dag.nodes)

    def should_resolve(self) -> bool:
        return self.completions_since_solve >= self.resolve_after

    # -- dispatch -----------------------------------------------------------
    def eligible_window(self) -> list[str]:
        """Pending subtasks whose predecessors are settled or in the window,
        in deterministic topological order, truncated to the batch size."""
        settled = set(self.completed) | set(self.running)
        pending = self.pending_ids()
        window: list[str] = []
        window_set: set[str] = set()
        changed = True
        while changed and len(window) < self.batch_size:
            changed = False
            for node_id in pending:
                if node_id in window_set:
                    continue
                preds = self.dag.predecessors(node_id)
                if all(p in settled or p in window_set for p in preds):
                    window.append(node_id)
                    window_set.add(node_id)
                    changed = True
                    if len(window) >= self.batch_size:
                        break
        return window

    def dispatch(self, now: float, robots: list[RobotSpec],
                 work_positions: dict[str, tuple[float, float]],
                 pinned: Optional[dict[str, str]] = None) -> list[DispatchItem]:
        """Re-solve over the eligible window and emit the next batch.

        ``pinned`` forces subtask -> robot bindings (operator reassignment);
        the solve keeps them constant by restricting the capable pool.
        """
        window = self.eligible_window()
        if not window:
            return []
        import time as _time
        alive = [r for r in robots if r.id not in self.failed_robots]
        avail: dict[str, float] = {r.id: max(now, r.available_from)
                                   for r in alive}
        for node_id, (rids, _, end) in self.running.items():
            for rid in rids:
                if rid in avail:
                    avail[rid] = max(avail[rid], end)
        specs = [RobotSpec(r.id, r.skills, r.velocity, r.position,
                           avail[r.id]) for r in alive]
        ext = dict(self.completed)
        for node_id, (_, _, end) in self.running.items():
            ext[node_id] = end
        t0 = _time.perf_counter()
        inst = build_instance([self.dag], specs, work_positions,
                              self.eps, now, external_finish=ext,
                              eligible=set(window), pinned=pinned)
        assignment = solve(inst)
        self.last_solve_seconds = _time.perf_counter() - t0
        self.solve_calls += 1
        self.completions_since_solve = 0
        problems = verify(inst, assignment)
        if problems:
            raise RuntimeError(f"solver output failed verification: {problems}")
        binding = assignment.binding_map()
        starts = assignment.start_map()
        durations = {s.id: s.duration for s in inst.subtasks}
        items = []
        for node_id in window:
            node = self.dag.node(node_id)
            items.append(DispatchItem(
                node=node, robots=binding[node_id], start=starts[node_id],
                end_estimate=starts[node_id] + durations[node_id]))
        items.sort(key=lambda it: (it.start, it.node.id))
        return items


class SchemeSelectionError(RuntimeError):
    """Every candidate scheme was infeasible; carries the certificates."""

    def __init__(self, certificates: list[tuple[int, str]]):
        lines = ", ".join(f"scheme {i}: {c}" for i, c in certificates)
        super().__init__(f"all candidate schemes infeasible ({lines})")
        self.certificates = certificates


def select_scheme(
    candidates: list[LayeredDag],
    build: Callable[[LayeredDag], SchedInstance],
) -> tuple[int, LayeredDag, Assignment]:
    """Solve one instance per candidate and keep the minimum makespan.

    Ties break on candidate index.  Raises :class:`SchemeSelectionError` with
    per-candidate certificates when nothing is feasible (the plan-switch
    trigger).
    """
    if not candidates:
        raise ValueError("need at least one candidate scheme")
    best: Optional[tuple[float, int, LayeredDag, Assignment]] = None
    certificates: list[tuple[int, str]] = []
    for ix, dag in enumerate(candidates):
        try:
            inst = build(dag)
            assignment = solve(inst)
        except Infeasible as exc:
            certificates.append((ix, f"{exc.constraint}: {exc.detail}"))
            continue
        if best is None or assignment.makespan < best[0]:
            best = (assignment.makespan, ix, dag, assignment)
    if best is None:
        raise SchemeSelectionError(certificates)
    return best[1], best[2], best[3]
