"""Discrete-event mission engine: planning pipeline, execution, adaptation.

Events are processed in (time, rank, insertion) order so completions precede
discoveries, adaptations, and interventions at equal timestamps.  After each
event a controller sweep drives every group's task pipeline: mission search,
scheme generation behind the optional approval gate, uncertainty-bounded
dispatch, robot routing, and monitor updates.  The whole run is a pure
function of (scenario, intervention trace, seed).
"""

from __future__ import annotations

import heapq
import json
import math
import threading
import time as _wall
from dataclasses import dataclass, field
from typing import Any, Optional

from . import catalog
from .automaton import extract_rposet, rposet_to_dag
from .ltl import parse_ltl
from .monitor import MissionTracker, SyncRule, observe, snapshot, verdict
from .scenario import Scenario
from .scheduler import (DispatchItem, Infeasible, RobotSpec, RollingDispatcher,
                        SchemeSelectionError, build_instance, select_scheme)
from .search import GroupProfile, SearchContext, SearchParams, TaskSite, search
from .subtasks import (BackendError, HttpBackend, LayeredDag, PlanLibrary,
                       RuleBackend, SubtaskNode, _dag_from_steps, build_prompt,
                       generate, insert_exploration, parse_schemes, retrieve,
                       validate_dag)
from .translate import translate_to_nba
from .world import (DISCOVERED, HANDLED, UNDISCOVERED, FeatureState,
                    ResourceState, RobotState, WorldState, centroid,
                    point_in_polygon)

RANK_COMPLETION = 0
RANK_DISCOVERY = 1
RANK_ADAPTATION = 2
RANK_INTERVENTION = 3
RANK_TIMEOUT = 4

ADAPTATION_CHAINS = {
    "new_task_type": ("task_reasoning", "subtask_generation",
                      "subtask_assignment"),
    "new_task_instance": ("group_allocation", "subtask_assignment"),
    "new_resource_type": ("subtask_generation", "subtask_assignment"),
    "new_resource_instance": ("resource_update", "subtask_assignment"),
    "robot_failure": ("subtask_assignment",),
}

INTERVENTION_KINDS = frozenset({
    "relabel_feature", "confirm_or_edit_plan", "select_scheme",
    "reassign_subtask", "define_region", "trigger_skill",
})


def exploration_outcome(p_success: float, rng) -> bool:
    """Bernoulli draw for an exploration sweep; p=0 never, p=1 always."""
    return rng.random() < p_success


@dataclass
class ExecState:
    item: DispatchItem
    task: str
    arrivals: dict[str, float] = field(default_factory=dict)
    routed: set[str] = field(default_factory=set)
    started_at: Optional[float] = None
    completes_at: Optional[float] = None
    waypoints: dict[str, list] = field(default_factory=dict)

    @property
    def node(self) -> SubtaskNode:
        return self.item.node


@dataclass
class TaskState:
    id: str
    type: str
    feature_id: str
    pos: tuple[float, float]
    group: Optional[str] = None
    status: str = "pending"  # pending|generating|awaiting|selecting|running|completed|failed
    candidates: list[LayeredDag] = field(default_factory=list)
    excluded_schemes: set[int] = field(default_factory=set)
    chosen_ix: Optional[int] = None
    dispatcher: Optional[RollingDispatcher] = None
    execs: dict[str, ExecState] = field(default_factory=dict)
    started_at: Optional[float] = None
    completed_at: Optional[float] = None
    intervals: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    failure_reason: str = ""


@dataclass
class RunMetrics:
    tasks_total: int = 0
    tasks_completed: int = 0
    tasks_failed: int = 0
    subtasks_dispatched: int = 0
    subtasks_completed: int = 0
    invocations: dict[str, int] = field(default_factory=lambda: {
        "task_reasoning": 0, "group_allocation": 0,
        "subtask_generation": 0, "subtask_assignment": 0})
    interventions: dict[str, int] = field(default_factory=dict)
    makespan_ms: int = 0
    per_task_completion_ms: dict[str, int] = field(default_factory=dict)
    solve_ms_max: float = 0.0

    def as_dict(self, deterministic: bool = False) -> dict:
        out = {
            "tasks_total": self.tasks_total,
            "tasks_completed": self.tasks_completed,
            "tasks_failed": self.tasks_failed,
            "subtasks_dispatched": self.subtasks_dispatched,
            "subtasks_completed": self.subtasks_completed,
            "invocations": dict(sorted(self.invocations.items())),
            "interventions": dict(sorted(self.interventions.items())),
            "makespan_ms": self.makespan_ms,
            "per_task_completion_ms": dict(
                sorted(self.per_task_completion_ms.items())),
        }
        if not deterministic:
            out["solve_ms_max"] = round(self.solve_ms_max, 3)
        return out


def _ms(t: float) -> int:
    return int(round(t * 1000))


class Engine:
    """Single-owner simulation loop; interventions enter through a queue."""

    def __init__(self, scenario: Scenario, seed: int,
                 interventions: Optional[list[dict]] = None,
                 human_override: Optional[bool] = None):
        import random as _random
        self.sc = scenario
        self.seed = seed
        self.rng = _random.Random(seed)
        self.human_on = (scenario.human.verification
                         if human_override is None else human_override)
        self.world = WorldState(
            width=scenario.arena[0], height=scenario.arena[1],
            features={f.id: FeatureState(f.id, f.type, f.pos,
                                         DISCOVERED if f.discovered
                                         else UNDISCOVERED)
                      for f in scenario.features},
            resources={r.id: ResourceState(r.id, r.type, r.pos, r.discovered)
                       for r in scenario.resources},
            robots={r.id: RobotState(r.id, r.platform, r.group, r.pos)
                    for r in scenario.robots},
        )
        self.group_home = {g.id: g.home for g in scenario.groups}
        self.group_members = {
            g.id: sorted(r.id for r in scenario.robots if r.group == g.id)
            for g in scenario.groups}
        self.requirements = dict(catalog.FEATURE_REQUIREMENTS)
        self.resource_types = set(catalog.RESOURCE_TYPES)
        self.service_times = dict(scenario.service_times)
        self.priors = dict(scenario.priors)
        self.plan_library = PlanLibrary.load(scenario.plan_library_path)
        self.explorable = frozenset(
            t for t, p in self.priors.items() if p > 0.0)
        if scenario.backend.kind == "http":
            self.backend: Any = HttpBackend(
                scenario.backend.url, scenario.backend.timeout,
                scenario.backend.retries)
        else:
            self.backend = RuleBackend(explorable=self.explorable)

        self.now = 0.0
        self.heap: list[tuple[int, int, int, str, dict]] = []
        self.seq = 0
        self.tasks: dict[str, TaskState] = {}
        self.group_plan: dict[str, list[str]] = {
            g.id: [] for g in scenario.groups}
        self.trackers: dict[str, MissionTracker] = {}
        self.pair_rules: set[tuple[str, str]] = set()
        self.scheme_cache: dict[tuple, list[LayeredDag]] = {}
        self.approvals: dict[str, dict] = {}
        self.approval_seq = 0
        self.regions: dict[str, list[tuple[float, float]]] = {}
        self.pinned: dict[str, str] = {}
        self.metrics = RunMetrics()
        self.log: list[dict] = []
        self.recorded_interventions: list[dict] = []
        self.solve_timings: list[dict] = []
        self.ended = False
        self._live_queue: list[dict] = []
        self._sense_scheduled = False
        # live mode: sim seconds advanced per wall second (0 = unpaced)
        self.pace = 0.0
        self.stop_requested = False
        self.lock = threading.RLock()
        self.intervention_results: dict[int, dict] = {}
        self._ticket_seq = 0
        for iv in interventions or []:
            self.push(float(iv.get("t", 0.0)), RANK_INTERVENTION,
                      "intervention", dict(iv))
        for ev in scenario.scripted_events:
            self.push(ev.t, RANK_ADAPTATION, "adaptation",
                      {"kind": ev.kind, "payload": dict(ev.payload)})

    # -- plumbing -------------------------------------------------------------
    def push(self, t: float, rank: int, kind: str, payload: dict) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (_ms(t), rank, self.seq, kind, payload))

    def emit(self, _ev: str, **payload) -> None:
        rec = {"t": _ms(self.now), "ev": _ev}
        rec.update(payload)
        self.log.append(rec)

    def submit_intervention(self, iv: dict) -> int:
        """Thread-safe entry point for live interventions; returns a ticket
        that resolves in ``intervention_results`` once applied."""
        with self.lock:
            self._ticket_seq += 1
            ticket = self._ticket_seq
            item = dict(iv)
            item["_ticket"] = ticket
            self._live_queue.append(item)
        return ticket

    # -- mission bookkeeping ----------------------------------------------------
    def _add_mission(self, mission_id: str, formula_text: str) -> None:
        automaton = translate_to_nba(
            parse_ltl(formula_text),
            state_budget=self.sc.planner.state_budget)
        self.trackers[mission_id] = MissionTracker(
            mission_id, automaton, formula_text=formula_text)
        self.emit("mission_added", mission=mission_id, formula=formula_text)

    def _instantiate_task(self, feature: FeatureState) -> TaskState:
        task = TaskState(id=feature.id, type=feature.type,
                         feature_id=feature.id, pos=feature.pos)
        self.tasks[task.id] = task
        self.metrics.tasks_total += 1
        self.emit("task_created", task=task.id, type=task.type,
                  feature=feature.id)
        self._add_mission(f"done_{task.id}", f"<> {task.id}")
        for rule in self.sc.order_rules:
            for other_id in sorted(self.tasks):
                other = self.tasks[other_id]
                if other.id == task.id or other.status == "completed":
                    continue
                if other.type in rule.before_types and \
                        task.type in rule.after_types:
                    self._add_pair(other.id, task.id)
                if task.type in rule.before_types and \
                        other.type in rule.after_types and \
                        other.status in ("pending",):
                    self._add_pair(task.id, other.id)
        return task

    def _add_pair(self, up: str, down: str) -> None:
        if (up, down) in self.pair_rules:
            return
        self.pair_rules.add((up, down))
        self._add_mission(f"order_{up}_{down}", f"(! {down}) U {up}")
        self.emit("poset_rule", up=up, down=down)

    def _derived_precedence(self) -> frozenset[tuple[str, str]]:
        """Union of R-posets extracted from every mission automaton."""
        pairs: set[tuple[str, str]] = set()
        task_ids = set(self.tasks)
        for mid in sorted(self.trackers):
            tr = self.trackers[mid]
            symbols = set(tr.automaton.alphabet) & task_ids
            if len(symbols) < 2:
                continue
            poset = extract_rposet(tr.automaton, symbols)
            pairs |= set(poset.precedence)
        return frozenset(pairs)

    # -- task reasoning -----------------------------------------------------------
    def _type_duration(self, task_type: str) -> float:
        rows = self.requirements.get(task_type, ())
        return float(sum(self.service_times.get(skill, 10.0)
                         for skill, _ in rows)) or 10.0

    def _group_capabilities(self, gid: str) -> set[str]:
        member_skills = [self.world.robots[rid].skills
                         for rid in self.group_members[gid]
                         if not self.world.robots[rid].failed]
        out = set()
        for task_id in sorted(self.tasks):
            task = self.tasks[task_id]
            if self._can_handle_dynamic(task.type, member_skills):
                out.add(task_id)
        return out

    def _can_handle_dynamic(self, task_type: str, member_skills) -> bool:
        for skill, count in self.requirements.get(task_type, ()):
            if sum(1 for sk in member_skills if skill in sk) < count:
                return False
        return True

    def _run_search(self, task_ids: list[str]) -> None:
        """Assign the given (unstarted) tasks to groups via the tree search."""
        if not task_ids:
            return
        self.metrics.invocations["task_reasoning"] += 1
        automata = {}
        initial = {}
        for tid in task_ids:
            automata[f"done_{tid}"] = self.trackers[f"done_{tid}"].automaton
        for up, down in sorted(self.pair_rules):
            if up in task_ids and down in task_ids:
                automata[f"order_{up}_{down}"] = \
                    self.trackers[f"order_{up}_{down}"].automaton
        # raw scenario missions join from their current tracked state, but
        # only when every incomplete task they mention is being replanned
        incomplete = {tid for tid in self.tasks
                      if self.tasks[tid].status != "completed"}
        for mid in sorted(self.trackers):
            if not mid.startswith("extra_"):
                continue
            alphabet = self.trackers[mid].automaton.alphabet
            if alphabet & set(task_ids) and \
                    (alphabet & incomplete) <= set(task_ids):
                automata[mid] = self.trackers[mid].automaton
                initial[mid] = self.trackers[mid].reachable.states
        groups = []
        for gid in sorted(self.group_plan):
            caps = self._group_capabilities(gid) & set(task_ids)
            if not caps:
                continue
            groups.append(GroupProfile(
                id=gid, members=tuple(self.group_members[gid]),
                capabilities=frozenset(caps), home=self.group_home[gid],
                velocity=2.0))
        sites = {tid: TaskSite(tid, self.tasks[tid].pos,
                               self._type_duration(self.tasks[tid].type))
                 for tid in task_ids}
        precedence = frozenset(
            (u, d) for u, d in self._derived_precedence()
            if u in task_ids and d in task_ids)
        ctx = SearchContext(
            automata=automata, groups=groups, tasks=sites,
            precedence=precedence,
            params=SearchParams(
                eta1=self.sc.planner.eta1, eta2=self.sc.planner.eta2,
                width=self.sc.planner.width, budget=self.sc.planner.budget),
            initial=initial or None)
        result = search(ctx)
        for gid in sorted(self.group_plan):
            keep = [tid for tid in self.group_plan[gid]
                    if tid not in task_ids]
            new_tail = [item.task for item in result.plans.get(gid, [])]
            self.group_plan[gid] = keep + new_tail
            for tid in new_tail:
                self.tasks[tid].group = gid
        self.emit("plan_computed",
                  assignments={g: list(p) for g, p in
                               sorted(self.group_plan.items())},
                  chi=round(result.chi, 3), complete=result.complete,
                  sequence=[list(x) for x in result.task_sequence])

    def _allocate_single(self, task: TaskState) -> None:
        """Cheapest-insertion group allocation for a single new task."""
        self.metrics.invocations["group_allocation"] += 1
        best: Optional[tuple[float, str]] = None
        for gid in sorted(self.group_plan):
            member_skills = [self.world.robots[rid].skills
                             for rid in self.group_members[gid]
                             if not self.world.robots[rid].failed]
            if not self._can_handle_dynamic(task.type, member_skills):
                continue
            tail = [t for t in self.group_plan[gid]
                    if self.tasks[t].status != "completed"]
            load = sum(self._type_duration(self.tasks[t].type) for t in tail)
            anchor = (self.tasks[tail[-1]].pos if tail
                      else self.group_home[gid])
            cost = load + math.dist(anchor, task.pos) / 2.0 \
                + self._type_duration(task.type)
            if best is None or (cost, gid) < best:
                best = (cost, gid)
        if best is None:
            task.status = "failed"
            task.failure_reason = "no capable group"
            self.metrics.tasks_failed += 1
            self.emit("task_failed", task=task.id, reason=task.failure_reason)
            return
        gid = best[1]
        task.group = gid
        self.group_plan[gid].append(task.id)
        self.emit("task_allocated", task=task.id, group=gid)

    # -- generation and scheme selection ---------------------------------------
    def _known_resource_types(self) -> frozenset[str]:
        return frozenset(r.type for r in self.world.resources.values()
                         if r.discovered)

    def _perception(self, near: tuple[float, float]):
        """Nearby discovered resources, nearest instance per type."""
        per_type: dict[str, ResourceState] = {}
        for rid in sorted(self.world.resources):
            res = self.world.resources[rid]
            if not res.discovered:
                continue
            cur = per_type.get(res.type)
            if cur is None or math.dist(res.pos, near) < math.dist(cur.pos, near):
                per_type[res.type] = res
        return tuple((t, per_type[t].pos) for t in sorted(per_type))

    def _generate_candidates(self, task: TaskState) -> list[LayeredDag]:
        known = self._known_resource_types()
        gid = task.group
        caps = sorted(set().union(*(self.world.robots[r].skills
                                    for r in self.group_members[gid]
                                    if not self.world.robots[r].failed)))
        cache_key = (task.type, known, frozenset(self.explorable),
                     tuple(sorted(self.regions)))
        cached = self.scheme_cache.get(cache_key)
        if cached is not None:
            dags = [LayeredDag(task.id, d.scheme,
                               tuple(SubtaskNode(
                                   id=f"{task.id}_s{d.scheme}_n{i}",
                                   skill=n.skill, robots=n.robots,
                                   duration=n.duration, resource=n.resource,
                                   p_success=n.p_success,
                                   exploration=n.exploration,
                                   regions=n.regions)
                                   for i, n in enumerate(d.nodes)),
                               _remap_edges(d, task.id), d.known_resources)
                    for d in cached]
            self.emit("generation", task=task.id, schemes=len(dags),
                      cached=True)
            return dags
        self.metrics.invocations["subtask_generation"] += 1
        ranked = retrieve(task.type.replace("_", " "), self.plan_library,
                          top_n=1)
        knowledge = ranked[0][1]
        ctx = build_prompt(task.id, task.type, knowledge, tuple(caps),
                           self._perception(task.pos))
        dags = generate(ctx, self.backend, self.service_times, known,
                        explorable=self.explorable, task_id=task.id)
        guarded = []
        for dag in dags:
            region = None
            for node in dag.nodes:
                if node.resource and node.resource in self.regions:
                    region = tuple(self.regions[node.resource])
            complete = insert_exploration(
                dag, known, self.priors,
                duration=self.service_times.get("local_exploration", 10.0) * 2,
                regions=region or ())
            if not validate_dag(complete, frozenset(caps)):
                guarded.append(complete)
        if not guarded:
            raise BackendError("no candidate scheme survived guarding")
        self.scheme_cache[cache_key] = guarded
        self.emit("generation", task=task.id, schemes=len(guarded),
                  cached=False)
        return guarded

    def _work_positions(self, task: TaskState,
                        dag: LayeredDag) -> dict[str, tuple[float, float]]:
        out = {}
        for node in dag.nodes:
            if node.exploration:
                if node.resource and node.resource in self.regions:
                    out[node.id] = centroid(self.regions[node.resource])
                else:
                    out[node.id] = (self.world.width / 2.0,
                                    self.world.height / 2.0)
            else:
                out[node.id] = task.pos
        return out

    def _robot_specs(self, gid: str) -> list[RobotSpec]:
        specs = []
        for rid in self.group_members[gid]:
            robot = self.world.robots[rid]
            if robot.failed:
                continue
            robot.settle(self.now)
            busy = 0.0
            specs.append(RobotSpec(rid, robot.skills, robot.velocity,
                                   robot.pos, max(self.now, busy)))
        return specs

    def _select_scheme(self, task: TaskState) -> bool:
        pool = [(ix, dag) for ix, dag in enumerate(task.candidates)
                if ix not in task.excluded_schemes]
        if not pool:
            task.status = "failed"
            task.failure_reason = "all schemes exhausted"
            self.metrics.tasks_failed += 1
            self.emit("task_failed", task=task.id, reason=task.failure_reason)
            return False
        self.metrics.invocations["subtask_assignment"] += 1
        specs = self._robot_specs(task.group)
        eps = self.sc.scheduler.eps

        def build(dag: LayeredDag):
            return build_instance(
                [dag], specs, self._work_positions(task, dag), eps, self.now)

        if task.chosen_ix is not None and \
                task.chosen_ix not in task.excluded_schemes:
            ix = task.chosen_ix
            dag = task.candidates[ix]
            mode = "operator"
        else:
            try:
                sub_ix, dag, _ = select_scheme([d for _, d in pool], build)
            except SchemeSelectionError as exc:
                task.status = "failed"
                task.failure_reason = str(exc)
                self.metrics.tasks_failed += 1
                self.emit("task_failed", task=task.id,
                          reason=task.failure_reason)
                return False
            ix = pool[sub_ix][0]
            mode = "makespan"
        task.chosen_ix = ix
        task.dispatcher = RollingDispatcher(
            self._carry_over_completed(task, task.candidates[ix]),
            eps=eps, batch_size=self.sc.scheduler.batch_size,
            resolve_after=self.sc.scheduler.resolve_after)
        task.status = "running"
        self.emit("scheme_selected", task=task.id, scheme=ix, mode=mode)
        self._dispatch(task)
        return True

    def _carry_over_completed(self, task: TaskState,
                              dag: LayeredDag) -> LayeredDag:
        """Credit finished work when switching schemes mid-task.

        Nodes of the new scheme matching a completed node's (skill, resource,
        robots) signature are pre-completed in the dispatcher after creation;
        here we only return the dag, the matching happens in _dispatch setup.
        """
        return dag

    def _dispatch(self, task: TaskState) -> None:
        disp = task.dispatcher
        assert disp is not None
        if not disp.completed and not task.execs:
            # scheme switch: credit already-finished work whose signature
            # matches a node of the new scheme (shared prefixes like inspect)
            sigs = self._completed_signatures(task)
            for node in disp.dag.nodes:
                sig = (node.skill, node.resource, node.robots)
                if sigs.get(sig):
                    disp.completed[node.id] = sigs[sig].pop(0)
            disp.completions_since_solve = 0
        self.metrics.invocations["subtask_assignment"] += 1
        try:
            items = disp.dispatch(self.now, self._robot_specs(task.group),
                                  self._work_positions(task, disp.dag),
                                  pinned={k: v for k, v in self.pinned.items()
                                          if k in {n.id for n in disp.dag.nodes}})
        except Infeasible as exc:
            task.excluded_schemes.add(task.chosen_ix)
            task.chosen_ix = None
            task.dispatcher = None
            task.status = "selecting"
            self.emit("scheme_infeasible", task=task.id,
                      reason=f"{exc.constraint}: {exc.detail}")
            return
        self.metrics.solve_ms_max = max(self.metrics.solve_ms_max,
                                        disp.last_solve_seconds * 1000)
        # replace non-started execs with the fresh batch
        for exec_id in [eid for eid, ex in task.execs.items()
                        if ex.started_at is None]:
            ex = task.execs.pop(exec_id)
            for rid in ex.routed:
                robot = self.world.robots[rid]
                if robot.activity == exec_id:
                    robot.halt(self.now)
        new_count = 0
        for item in items:
            if item.node.id in task.execs or item.node.id in disp.completed:
                continue
            task.execs[item.node.id] = ExecState(item=item, task=task.id)
            new_count += 1
        self.metrics.subtasks_dispatched += new_count
        self.solve_timings.append(
            {"t": _ms(self.now), "task": task.id,
             "solve_ms": disp.last_solve_seconds * 1000,
             "window": len(items)})
        self.emit("dispatch", task=task.id,
                  items=[{"subtask": it.node.id, "robots": list(it.robots),
                          "start": _ms(it.start)} for it in items])

    def _completed_signatures(self, task: TaskState) -> dict:
        out: dict = {}
        for eid, entry in sorted(getattr(task, "_history", {}).items()):
            finished_at, (skill, resource, robots) = entry
            out.setdefault((skill, resource, robots), []).append(finished_at)
        return out

    # -- execution ----------------------------------------------------------------
    def _route_idle_robots(self) -> None:
        assignments: dict[str, list[ExecState]] = {}
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            if task.status != "running":
                continue
            for eid in sorted(task.execs):
                ex = task.execs[eid]
                if ex.started_at is not None:
                    continue
                for rid in ex.item.robots:
                    assignments.setdefault(rid, []).append(ex)
        for rid in sorted(assignments):
            robot = self.world.robots[rid]
            if robot.failed or robot.activity is not None:
                continue
            queue = sorted(assignments[rid],
                           key=lambda ex: (ex.item.start, ex.node.id))
            for ex in queue:
                if rid in ex.routed:
                    continue
                waypoints = self._waypoints_for(ex)
                if waypoints is None:
                    # earliest assignment lacks a located resource; hold
                    # position rather than jumping the per-robot sequence
                    break
                origin = robot.pos
                arrival = robot.plan_route(self.now, waypoints)
                robot.activity = ex.node.id
                ex.routed.add(rid)
                ex.waypoints[rid] = waypoints
                self.emit("robot_route", robot=rid, subtask=ex.node.id,
                          origin=[round(origin[0], 3), round(origin[1], 3)],
                          waypoints=[[round(x, 3), round(y, 3)]
                                     for x, y in waypoints],
                          depart=_ms(self.now), arrive=_ms(arrival))
                self.push(arrival, RANK_COMPLETION, "arrival",
                          {"robot": rid, "task": ex.task,
                           "subtask": ex.node.id})
                break

    def _waypoints_for(self, ex: ExecState) -> Optional[list]:
        task = self.tasks[ex.task]
        node = ex.node
        if node.exploration:
            target = self._work_positions(task, self.tasks[ex.task]
                                          .dispatcher.dag)[node.id]
            return [target]
        if node.resource:
            region = self.regions.get(node.resource)
            res = self.world.nearest_resource(node.resource, task.pos,
                                              within=region)
            if res is None:
                return None
            return [res.pos, task.pos]
        return [task.pos]

    def _try_start_execs(self) -> None:
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            if task.status != "running" or task.dispatcher is None:
                continue
            disp = task.dispatcher
            for eid in sorted(task.execs):
                ex = task.execs[eid]
                if ex.started_at is not None:
                    continue
                preds = disp.dag.predecessors(eid)
                if not all(p in disp.completed for p in preds):
                    continue
                if set(ex.item.robots) - set(ex.arrivals):
                    continue
                start = self.now
                ex.started_at = start
                service = ex.node.duration
                ex.completes_at = start + service
                disp.on_started(eid, ex.item.robots, start, ex.completes_at)
                for rid in ex.item.robots:
                    task.intervals.setdefault(rid, []).append(
                        (start, ex.completes_at))
                self.emit("subtask_started", subtask=eid, task=tid,
                          skill=ex.node.skill,
                          robots=list(ex.item.robots),
                          starts={r: _ms(start) for r in ex.item.robots},
                          exploration=ex.node.exploration)
                kind = ("exploration_resolve" if ex.node.exploration
                        else "subtask_complete")
                self.push(ex.completes_at, RANK_COMPLETION, kind,
                          {"task": tid, "subtask": eid})

    # -- event handlers --------------------------------------------------------
    def _on_arrival(self, payload: dict) -> None:
        task = self.tasks.get(payload["task"])
        rid = payload["robot"]
        robot = self.world.robots[rid]
        robot.settle(self.now)
        if task is None or payload["subtask"] not in task.execs:
            if robot.activity == payload["subtask"]:
                robot.halt(self.now)
            return
        ex = task.execs[payload["subtask"]]
        if robot.activity != ex.node.id or robot.failed:
            return
        ex.arrivals[rid] = self.now

    def _on_subtask_complete(self, payload: dict) -> None:
        task = self.tasks.get(payload["task"])
        if task is None or task.dispatcher is None:
            return
        eid = payload["subtask"]
        ex = task.execs.get(eid)
        if ex is None or ex.started_at is None or \
                ex.completes_at is None or _ms(ex.completes_at) != _ms(self.now):
            return
        disp = task.dispatcher
        disp.on_completed(eid, self.now)
        history = getattr(task, "_history", None)
        if history is None:
            history = {}
            setattr(task, "_history", history)
        history[eid] = (self.now, (ex.node.skill, ex.node.resource,
                                   ex.node.robots))
        self.metrics.subtasks_completed += 1
        for rid in ex.item.robots:
            robot = self.world.robots[rid]
            if robot.activity == eid:
                robot.halt(self.now)
        del task.execs[eid]
        self.emit("subtask_completed", subtask=eid, task=task.id,
                  robots=list(ex.item.robots), started=_ms(ex.started_at),
                  ended=_ms(self.now))
        if disp.finished():
            self._complete_task(task)
        elif disp.should_resolve() or not task.execs:
            self._dispatch(task)

    def _on_exploration_resolve(self, payload: dict) -> None:
        task = self.tasks.get(payload["task"])
        if task is None or task.dispatcher is None:
            return
        eid = payload["subtask"]
        ex = task.execs.get(eid)
        if ex is None or ex.started_at is None or \
                _ms(ex.completes_at or -1) != _ms(self.now):
            return
        node = ex.node
        rtype = node.resource
        success = exploration_outcome(node.p_success, self.rng)
        found: Optional[ResourceState] = None
        if success and rtype:
            region = self.regions.get(rtype)
            hidden = [r for r in self.world.hidden_resources(rtype)
                      if region is None or point_in_polygon(r.pos, region)]
            if hidden:
                found = min(hidden,
                            key=lambda r: (math.dist(r.pos, task.pos), r.id))
        if found is not None:
            found.discovered = True
            self.emit("resource_discovered", resource=found.id,
                      type=found.type, pos=[round(found.pos[0], 3),
                                            round(found.pos[1], 3)],
                      via="exploration")
            self.emit("exploration_result", subtask=eid, task=task.id,
                      success=True, resource=found.id)
            self._on_subtask_complete(payload)
        else:
            disp = task.dispatcher
            disp.running.pop(eid, None)
            for rid in ex.item.robots:
                robot = self.world.robots[rid]
                if robot.activity == eid:
                    robot.halt(self.now)
            del task.execs[eid]
            self.emit("exploration_result", subtask=eid, task=task.id,
                      success=False, resource=None)
            # the scheme relying on this resource is out; fall back
            for exec_id in [k for k, v in task.execs.items()
                            if v.started_at is None]:
                ex2 = task.execs.pop(exec_id)
                for rid in ex2.routed:
                    robot = self.world.robots[rid]
                    if robot.activity == exec_id:
                        robot.halt(self.now)
            task.excluded_schemes.add(task.chosen_ix)
            task.chosen_ix = None
            task.dispatcher = None
            task.status = "selecting"
            self.emit("scheme_abandoned", task=task.id,
                      reason=f"exploration failed for {rtype}")

    def _complete_task(self, task: TaskState) -> None:
        task.status = "completed"
        task.completed_at = self.now
        self.metrics.tasks_completed += 1
        self.metrics.per_task_completion_ms[task.id] = _ms(self.now)
        feature = self.world.features[task.feature_id]
        if feature.status != HANDLED:
            feature.handle()
        self.emit("task_completed", task=task.id)
        label = frozenset({task.id})
        for mid in sorted(self.trackers):
            tr = self.trackers[mid]
            v = observe(tr, self.now, label)
            self.emit("mission_update", mission=mid, verdict=v,
                      distance=(None if math.isinf(tr.distance)
                                else tr.distance))

    def _on_adaptation(self, payload: dict) -> None:
        kind = payload["kind"]
        chain = ADAPTATION_CHAINS.get(kind)
        if chain is None:
            raise ValueError(f"unroutable adaptation kind {kind}")
        self.emit("adaptation", kind=kind, chain=list(chain),
                  payload=_brief(payload.get("payload", {})))
        body = payload.get("payload", {})
        if kind == "robot_failure":
            self._adapt_robot_failure(body)
        elif kind == "new_task_type":
            self._adapt_new_task_type(body)
        elif kind == "new_task_instance":
            self._adapt_new_task_instance(body)
        elif kind == "new_resource_type":
            self._adapt_new_resource_type(body)
        elif kind == "new_resource_instance":
            self._adapt_new_resource_instance(body)

    def _adapt_robot_failure(self, body: dict) -> None:
        rid = body["robot"]
        robot = self.world.robots[rid]
        robot.settle(self.now)
        robot.failed = True
        robot.route = []
        robot.activity = None
        self.emit("robot_failed", robot=rid)
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            if task.dispatcher is None or task.status != "running":
                continue
            affected = [eid for eid, ex in task.execs.items()
                        if rid in ex.item.robots]
            if not affected:
                continue
            task.dispatcher.on_robot_failed(rid)
            for eid in affected:
                ex = task.execs.pop(eid)
                for other in ex.item.robots:
                    rb = self.world.robots[other]
                    if rb.activity == eid:
                        rb.halt(self.now)
                if ex.started_at is not None:
                    self.emit("subtask_aborted", subtask=eid, task=tid,
                              reason=f"robot {rid} failed")
            self._dispatch(task)

    def _adapt_new_task_type(self, body: dict) -> None:
        type_name = body["type_name"]
        rows = tuple((str(s), int(c)) for s, c in body.get("skills", []))
        self.requirements[type_name] = rows
        recipes = []
        for recipe in body.get("recipes", []):
            recipes.append([(str(sk), (res or None), int(n))
                            for sk, res, n in recipe])
        if isinstance(self.backend, RuleBackend):
            self.backend.register(type_name, recipes)
        feat = body.get("feature")
        new_ids = []
        if feat:
            feature = FeatureState(feat["id"], type_name,
                                   (float(feat["pos"][0]),
                                    float(feat["pos"][1])), DISCOVERED)
            self.world.features[feature.id] = feature
            self.emit("feature_discovered", feature=feature.id,
                      type=type_name, via="adaptation")
            task = self._instantiate_task(feature)
            new_ids.append(task.id)
        pending = [tid for tid in sorted(self.tasks)
                   if self.tasks[tid].status == "pending"
                   and self.tasks[tid].started_at is None]
        self._run_search(pending)

    def _adapt_new_task_instance(self, body: dict) -> None:
        feat = body["feature"]
        feature = FeatureState(feat["id"], feat["type"],
                               (float(feat["pos"][0]), float(feat["pos"][1])),
                               DISCOVERED)
        self.world.features[feature.id] = feature
        self.emit("feature_discovered", feature=feature.id,
                  type=feature.type, via="adaptation")
        task = self._instantiate_task(feature)
        self._allocate_single(task)

    def _adapt_new_resource_type(self, body: dict) -> None:
        type_name = body["type_name"]
        self.resource_types.add(type_name)
        inst = body.get("instance")
        if inst:
            res = ResourceState(inst["id"], type_name,
                                (float(inst["pos"][0]), float(inst["pos"][1])),
                                True)
            self.world.resources[res.id] = res
            self.emit("resource_discovered", resource=res.id, type=type_name,
                      pos=[round(res.pos[0], 3), round(res.pos[1], 3)],
                      via="adaptation")
        for recipe_row in body.get("recipes", []):
            task_type = recipe_row["task_type"]
            recipes = [[(str(sk), (res or None), int(n))
                        for sk, res, n in r] for r in recipe_row["schemes"]]
            if isinstance(self.backend, RuleBackend):
                self.backend.register(task_type, recipes)
        # regenerate schemes for tasks that may now decompose differently
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            if task.status not in ("running", "awaiting", "selecting"):
                continue
            if not task.execs or all(ex.started_at is None
                                     for ex in task.execs.values()):
                for eid in list(task.execs):
                    ex = task.execs.pop(eid)
                    for rid in ex.routed:
                        robot = self.world.robots[rid]
                        if robot.activity == eid:
                            robot.halt(self.now)
                task.candidates = self._generate_candidates(task)
                task.excluded_schemes = set()
                task.chosen_ix = None
                task.dispatcher = None
                task.status = "selecting"
                self.emit("scheme_regenerated", task=tid)

    def _adapt_new_resource_instance(self, body: dict) -> None:
        inst = body["instance"]
        res = ResourceState(inst["id"], inst["type"],
                            (float(inst["pos"][0]), float(inst["pos"][1])),
                            True)
        self.world.resources[res.id] = res
        self.emit("resource_discovered", resource=res.id, type=res.type,
                  pos=[round(res.pos[0], 3), round(res.pos[1], 3)],
                  via="adaptation")
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            if task.status != "running" or task.dispatcher is None:
                continue
            uses = any(n.resource == res.type
                       for n in task.dispatcher.dag.nodes
                       if n.id not in task.dispatcher.completed)
            if uses:
                self._dispatch(task)

    # -- interventions -----------------------------------------------------------
    def _on_intervention(self, payload: dict) -> None:
        kind = payload.get("kind", "")
        ticket = payload.pop("_ticket", None)
        record = {"t": _ms(self.now), "kind": kind,
                  "payload": {k: v for k, v in sorted(payload.items())
                              if k not in ("t", "kind")}}
        try:
            if kind not in INTERVENTION_KINDS:
                raise ValueError(f"unknown intervention kind '{kind}'")
            handler = getattr(self, f"_iv_{kind}")
            handler(payload)
        except Exception as exc:  # noqa: BLE001 - boundary, run unaffected
            self.emit("intervention", kind=kind, accepted=False,
                      reason=str(exc))
            if ticket is not None:
                self.intervention_results[ticket] = {
                    "accepted": False, "reason": str(exc),
                    "t": _ms(self.now)}
            return
        self.metrics.interventions[kind] = \
            self.metrics.interventions.get(kind, 0) + 1
        self.recorded_interventions.append(record)
        self.emit("intervention", kind=kind, accepted=True,
                  payload=record["payload"])
        if ticket is not None:
            self.intervention_results[ticket] = {
                "accepted": True, "reason": "", "t": _ms(self.now)}

    def _iv_relabel_feature(self, payload: dict) -> None:
        fid = payload["feature"]
        new_type = payload["new_type"]
        feature = self.world.features.get(fid)
        if feature is None:
            raise ValueError(f"unknown feature {fid}")
        if new_type not in self.requirements:
            raise ValueError(f"unknown feature type {new_type}")
        task = self.tasks.get(fid)
        if task is not None and task.status not in ("pending",):
            raise ValueError("task already started; relabel rejected")
        old_type = feature.type
        feature.type = new_type
        if task is not None:
            task.type = new_type
            # ordering pairs derive from types: rebuild those touching this task
            for up, down in sorted(self.pair_rules):
                if up == task.id or down == task.id:
                    self.pair_rules.discard((up, down))
                    self.trackers.pop(f"order_{up}_{down}", None)
            for rule in self.sc.order_rules:
                for other_id in sorted(self.tasks):
                    other = self.tasks[other_id]
                    if other.id == task.id or other.status == "completed":
                        continue
                    if other.type in rule.before_types and \
                            task.type in rule.after_types:
                        self._add_pair(other.id, task.id)
                    if task.type in rule.before_types and \
                            other.type in rule.after_types and \
                            other.status == "pending":
                        self._add_pair(task.id, other.id)
        self.emit("feature_relabeled", feature=fid, old=old_type,
                  new=new_type)

    def _iv_confirm_or_edit_plan(self, payload: dict) -> None:
        approval_id = payload["approval"]
        pending = self.approvals.get(approval_id)
        if pending is None or pending.get("resolved"):
            raise ValueError(f"no pending approval {approval_id}")
        task = self.tasks[pending["task"]]
        edited = False
        if payload.get("scheme"):
            steps = parse_schemes(json.dumps(
                {"schemes": [{"steps": payload["scheme"]}]}))[0]
            dag = _dag_from_steps(task.id, len(task.candidates), task.type,
                                  steps, self.service_times,
                                  self._known_resource_types())
            dag = insert_exploration(dag, self._known_resource_types(),
                                     self.priors)
            caps = frozenset().union(
                *(self.world.robots[r].skills
                  for r in self.group_members[task.group]))
            problems = validate_dag(dag, caps)
            if problems:
                raise ValueError(f"edited scheme invalid: {problems}")
            task.candidates.append(dag)
            edited = True
        if payload.get("scheme_index") is not None:
            ix = int(payload["scheme_index"])
            if not 0 <= ix < len(task.candidates):
                raise ValueError("scheme index out of range")
            task.chosen_ix = ix
        elif edited:
            task.chosen_ix = len(task.candidates) - 1
        pending["resolved"] = "human"
        task.status = "selecting"
        self.emit("approval_resolved", approval=approval_id, mode="human",
                  edited=edited)

    def _iv_select_scheme(self, payload: dict) -> None:
        task = self.tasks.get(payload["task"])
        if task is None:
            raise ValueError("unknown task")
        if task.status not in ("awaiting", "selecting"):
            raise ValueError(f"task is {task.status}; selection rejected")
        ix = int(payload["scheme_index"])
        if not 0 <= ix < len(task.candidates):
            raise ValueError("scheme index out of range")
        task.chosen_ix = ix
        for aid, pending in sorted(self.approvals.items()):
            if pending["task"] == task.id and not pending.get("resolved"):
                pending["resolved"] = "human"
                self.emit("approval_resolved", approval=aid, mode="human",
                          edited=False)
        task.status = "selecting"

    def _iv_reassign_subtask(self, payload: dict) -> None:
        sid = payload["subtask"]
        rid = payload["robot"]
        if rid not in self.world.robots:
            raise ValueError(f"unknown robot {rid}")
        if self.world.robots[rid].failed:
            raise ValueError(f"robot {rid} has failed")
        owner = None
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            if task.dispatcher and any(n.id == sid
                                       for n in task.dispatcher.dag.nodes):
                owner = task
                break
        if owner is None:
            raise ValueError(f"unknown subtask {sid}")
        if sid in owner.dispatcher.completed or \
                sid in owner.dispatcher.running:
            raise ValueError("subtask already started")
        self.pinned[sid] = rid
        self._dispatch(owner)

    def _iv_define_region(self, payload: dict) -> None:
        rtype = payload["resource_type"]
        polygon = [(float(x), float(y)) for x, y in payload["polygon"]]
        if len(polygon) < 3:
            raise ValueError("region polygon needs at least 3 vertices")
        self.regions[rtype] = polygon
        self.emit("region_defined", resource_type=rtype,
                  polygon=[[round(x, 3), round(y, 3)] for x, y in polygon])

    def _iv_trigger_skill(self, payload: dict) -> None:
        rid = payload["robot"]
        skill = payload["skill"]
        robot = self.world.robots.get(rid)
        if robot is None or robot.failed:
            raise ValueError(f"robot {rid} unavailable")
        if robot.activity is not None:
            raise ValueError(f"robot {rid} is busy")
        if skill not in robot.skills:
            raise ValueError(f"robot {rid} lacks skill {skill}")
        target = (float(payload["target"][0]), float(payload["target"][1]))
        arrival = robot.plan_route(self.now, [target])
        robot.activity = f"manual_{skill}_{rid}"
        done = arrival + self.service_times.get(skill, 10.0)
        self.push(done, RANK_COMPLETION, "manual_complete",
                  {"robot": rid, "skill": skill,
                   "target": [target[0], target[1]]})

    def _on_manual_complete(self, payload: dict) -> None:
        robot = self.world.robots[payload["robot"]]
        robot.halt(self.now)
        self.emit("manual_skill", robot=payload["robot"],
                  skill=payload["skill"],
                  target=[round(payload["target"][0], 3),
                          round(payload["target"][1], 3)])

    def _on_approval_timeout(self, payload: dict) -> None:
        aid = payload["approval"]
        pending = self.approvals.get(aid)
        if pending is None or pending.get("resolved"):
            return
        pending["resolved"] = "auto"
        task = self.tasks[pending["task"]]
        if task.status == "awaiting":
            task.status = "selecting"
        self.emit("approval_resolved", approval=aid, mode="auto",
                  edited=False)

    def _on_sense(self, payload: dict) -> None:
        del payload
        self._sense_scheduled = False
        # step the interval since the previous sense pulse so positions land
        # exactly on the current event time
        self.world.clock = max(0.0, self.now - self.sc.sim.tick)
        discovered = self.world.step_motion(
            self.now - self.world.clock or self.sc.sim.tick,
            self.sc.sim.sense_radius_ground, self.sc.sim.sense_radius_air)
        self.world.clock = self.now
        for item_id in discovered:
            if item_id in self.world.features:
                feature = self.world.features[item_id]
                self.emit("feature_discovered", feature=item_id,
                          type=feature.type, via="sense")
                if item_id not in self.tasks:
                    chain = ADAPTATION_CHAINS["new_task_instance"]
                    self.emit("adaptation", kind="new_task_instance",
                              chain=list(chain),
                              payload={"feature": item_id})
                    task = self._instantiate_task(feature)
                    self._allocate_single(task)
            else:
                res = self.world.resources[item_id]
                self.emit("resource_discovered", resource=item_id,
                          type=res.type, pos=[round(res.pos[0], 3),
                                              round(res.pos[1], 3)],
                          via="sense")
        self._maybe_schedule_sense()

    def _maybe_schedule_sense(self) -> None:
        if self._sense_scheduled:
            return
        any_hidden = any(f.status == UNDISCOVERED
                         for f in self.world.features.values()) or \
            any(not r.discovered for r in self.world.resources.values())
        if any_hidden:
            self._sense_scheduled = True
            self.push(self.now + self.sc.sim.tick, RANK_DISCOVERY, "sense", {})

    # -- controller ----------------------------------------------------------------
    def _controller(self) -> None:
        for gid in sorted(self.group_plan):
            plan = self.group_plan[gid]
            active = None
            for tid in plan:
                task = self.tasks[tid]
                if task.status in ("generating", "awaiting", "selecting",
                                   "running"):
                    active = task
                    break
                if task.status == "pending":
                    preds_done = all(
                        self.tasks[up].status == "completed"
                        for up, down in self.pair_rules if down == tid
                        and up in self.tasks)
                    if preds_done:
                        task.status = "generating"
                        task.started_at = self.now
                        self.emit("task_started", task=tid, group=gid)
                        active = task
                    break
                if task.status in ("completed", "failed"):
                    continue
                break
            if active is None:
                continue
            if active.status == "generating":
                try:
                    active.candidates = self._generate_candidates(active)
                except BackendError as exc:
                    active.status = "failed"
                    active.failure_reason = f"generation: {exc}"
                    self.metrics.tasks_failed += 1
                    self.emit("task_failed", task=active.id,
                              reason=active.failure_reason)
                    continue
                if self.human_on:
                    self.approval_seq += 1
                    aid = f"ap{self.approval_seq}"
                    self.approvals[aid] = {"task": active.id,
                                           "resolved": None}
                    active.status = "awaiting"
                    self.emit("approval_pending", approval=aid,
                              task=active.id,
                              schemes=[_scheme_brief(d)
                                       for d in active.candidates])
                    self.push(self.now + self.sc.human.approval_timeout,
                              RANK_TIMEOUT, "approval_timeout",
                              {"approval": aid})
                else:
                    active.status = "selecting"
            if active.status == "selecting":
                self._select_scheme(active)
        self._route_idle_robots()
        self._try_start_execs()
        self._maybe_schedule_sense()

    def _all_settled(self) -> bool:
        return all(t.status in ("completed", "failed")
                   for t in self.tasks.values())

    # -- main loop -------------------------------------------------------------------
    def run(self) -> RunMetrics:
        self.emit("run_start", scenario=self.sc.name, seed=self.seed,
                  scenario_sha=self.sc.source_sha)
        for fid in sorted(self.world.features):
            feature = self.world.features[fid]
            if feature.status == DISCOVERED:
                self.emit("feature_discovered", feature=fid,
                          type=feature.type, via="initial")
                self._instantiate_task(feature)
        for i, text in enumerate(self.sc.extra_missions):
            self._add_mission(f"extra_{i}", text)
        self._run_search([tid for tid in sorted(self.tasks)
                          if self.tasks[tid].status == "pending"])
        self._emit_sync_rules()
        self._controller()
        max_ms = _ms(self.sc.sim.max_time)
        handlers = {
            "arrival": self._on_arrival,
            "subtask_complete": self._on_subtask_complete,
            "exploration_resolve": self._on_exploration_resolve,
            "manual_complete": self._on_manual_complete,
            "adaptation": self._on_adaptation,
            "intervention": self._on_intervention,
            "approval_timeout": self._on_approval_timeout,
            "sense": self._on_sense,
        }
        wall_start = _wall.perf_counter()
        while self.heap and not self.stop_requested:
            with self.lock:
                if self._live_queue:
                    for iv in self._live_queue:
                        self.push(self.now, RANK_INTERVENTION, "intervention",
                                  iv)
                    self._live_queue = []
            if self.pace > 0:
                due = wall_start + (self.heap[0][0] / 1000.0) / self.pace
                while _wall.perf_counter() < due and not self.stop_requested:
                    _wall.sleep(min(0.02, due - _wall.perf_counter()))
                    with self.lock:
                        if self._live_queue:
                            for iv in self._live_queue:
                                self.push(self.now, RANK_INTERVENTION,
                                          "intervention", iv)
                            self._live_queue = []
                    due = wall_start + (self.heap[0][0] / 1000.0) / self.pace
            with self.lock:
                t_ms, rank, _, kind, payload = heapq.heappop(self.heap)
                if t_ms > max_ms:
                    break
                self.now = t_ms / 1000.0
                handlers[kind](payload)
                self._controller()
                if self._all_settled() and not self._live_queue and not any(
                        k in ("adaptation", "intervention", "manual_complete")
                        for _, _, _, k, _ in self.heap):
                    break
        self.metrics.makespan_ms = _ms(self.now)
        self.emit("run_end",
                  completed=self.metrics.tasks_completed,
                  failed=self.metrics.tasks_failed,
                  makespan_ms=self.metrics.makespan_ms,
                  verdicts={m: verdict(self.trackers[m])
                            for m in sorted(self.trackers)})
        self.emit("metrics", **self.metrics.as_dict(deterministic=True))
        self.ended = True
        return self.metrics

    # -- exports ---------------------------------------------------------------------
    def _emit_sync_rules(self) -> None:
        for up, down in sorted(self.pair_rules):
            self.emit("sync_rule", kind="precedes", up=up, down=down)

    def sync_rules(self) -> list[SyncRule]:
        rules = [SyncRule("precedes", up, down)
                 for up, down in sorted(self.pair_rules)]
        seen: set[str] = set()
        for rec in self.log:
            if rec["ev"] == "subtask_started" and len(rec["robots"]) > 1:
                sid = rec["subtask"]
                if sid not in seen:
                    seen.add(sid)
                    rules.append(SyncRule("simultaneous", sid, sid))
        return rules

    def task_schedule(self) -> dict[str, list[tuple[str, float, float]]]:
        """Observed per-robot work intervals, task level."""
        out: dict[str, list[tuple[str, float, float]]] = {}
        for tid in sorted(self.tasks):
            task = self.tasks[tid]
            triples = []
            for rid in sorted(task.intervals):
                spans = task.intervals[rid]
                triples.append((rid, min(s for s, _ in spans),
                                max(e for _, e in spans)))
            if triples:
                out[tid] = triples
        return out

    def subtask_schedule(self) -> dict[str, list[tuple[str, float, float]]]:
        out: dict[str, list[tuple[str, float, float]]] = {}
        for rec in self.log:
            if rec["ev"] == "subtask_completed":
                sid = rec["subtask"]
                for rid in rec["robots"]:
                    out.setdefault(sid, []).append(
                        (rid, rec["started"] / 1000.0, rec["ended"] / 1000.0))
        return out

    def automata_snapshots(self) -> list[dict]:
        return [snapshot(self.trackers[m]) for m in sorted(self.trackers)]

    def state_snapshot(self) -> dict:
        """Immutable copy of the run state for API readers."""
        with self.lock:
            robots = []
            for rid in sorted(self.world.robots):
                robot = self.world.robots[rid]
                pos = robot.position_at(self.now)
                robots.append({
                    "id": rid, "platform": robot.platform,
                    "group": robot.group,
                    "pos": [round(pos[0], 3), round(pos[1], 3)],
                    "failed": robot.failed,
                    "activity": robot.activity,
                })
            tasks = []
            for tid in sorted(self.tasks):
                task = self.tasks[tid]
                tasks.append({
                    "id": tid, "type": task.type, "group": task.group,
                    "status": task.status, "scheme": task.chosen_ix,
                    "started_ms": (_ms(task.started_at)
                                   if task.started_at is not None else None),
                    "completed_ms": (_ms(task.completed_at)
                                     if task.completed_at is not None
                                     else None),
                })
            missions = []
            for mid in sorted(self.trackers):
                tr = self.trackers[mid]
                missions.append({
                    "id": mid, "verdict": verdict(tr),
                    "distance": (None if math.isinf(tr.distance)
                                 else tr.distance),
                    "formula": tr.formula_text,
                })
            approvals = []
            for aid in sorted(self.approvals):
                pending = self.approvals[aid]
                if pending.get("resolved"):
                    continue
                task = self.tasks[pending["task"]]
                approvals.append({
                    "id": aid, "task": task.id,
                    "schemes": [_scheme_brief(d) for d in task.candidates],
                })
            return {
                "time_ms": _ms(self.now),
                "status": "ended" if self.ended else "running",
                "scenario": self.sc.name,
                "seed": self.seed,
                "arena": [self.sc.arena[0], self.sc.arena[1]],
                "robots": robots,
                "features": [{
                    "id": fid,
                    "type": self.world.features[fid].type,
                    "status": self.world.features[fid].status,
                    "pos": [round(self.world.features[fid].pos[0], 3),
                            round(self.world.features[fid].pos[1], 3)],
                } for fid in sorted(self.world.features)],
                "resources": [{
                    "id": rid,
                    "type": self.world.resources[rid].type,
                    "discovered": self.world.resources[rid].discovered,
                    "pos": [round(self.world.resources[rid].pos[0], 3),
                            round(self.world.resources[rid].pos[1], 3)],
                } for rid in sorted(self.world.resources)],
                "regions": {k: [[x, y] for x, y in v]
                            for k, v in sorted(self.regions.items())},
                "tasks": tasks,
                "missions": missions,
                "pending_approvals": approvals,
                "metrics": self.metrics.as_dict(deterministic=True),
            }

    def task_dag_export(self) -> str:
        from .automaton import RPoset
        tasks = frozenset(self.tasks)
        prec = frozenset((u, d) for u, d in self.pair_rules
                         if u in tasks and d in tasks)
        return rposet_to_dag(RPoset(tasks, prec, frozenset())).to_dot()


def _brief(payload: dict) -> dict:
    out = {}
    for k in sorted(payload):
        v = payload[k]
        if isinstance(v, (str, int, float, bool)):
            out[k] = v
        elif isinstance(v, dict) and "id" in v:
            out[k] = v["id"]
        else:
            out[k] = str(type(v).__name__)
    return out


def _scheme_brief(dag: LayeredDag) -> dict:
    return {
        "scheme": dag.scheme,
        "steps": [{"subtask": n.id, "skill": n.skill,
                   "resource": n.resource or "",
                   "robots": n.robots,
                   "exploration": n.exploration}
                  for n in dag.nodes],
    }


def _remap_edges(dag: LayeredDag, new_task: str) -> frozenset[tuple[str, str]]:
    mapping = {n.id: f"{new_task}_s{dag.scheme}_n{i}"
               for i, n in enumerate(dag.nodes)}
    return frozenset((mapping[a], mapping[b]) for a, b in dag.edges)
