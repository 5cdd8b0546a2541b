"""Multi-automaton guided tree search for task-to-group assignment.

Nodes pair partial per-group plans with the reachable state sets of every
mission automaton.  Selection expands the lowest-valued frontier nodes, new
nodes are bounded by Pareto dominance over performance profiles, and start
times come from a longest-path schedule over precedence difference
constraints.  The incumbent is the cheapest node whose missions all intersect
their accepting sets with every task assigned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .automaton import Nba, min_distance


class ScheduleInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class GroupProfile:
    """Robot group: capability set over task symbols plus staging geometry."""

    id: str
    members: tuple[str, ...]
    capabilities: frozenset[str]
    home: tuple[float, float]
    velocity: float = 2.0

    def __post_init__(self) -> None:
        if not self.capabilities:
            raise ValueError(f"group {self.id} has no capabilities")
        if self.velocity <= 0:
            raise ValueError("velocity must be positive")


@dataclass(frozen=True)
class TaskSite:
    symbol: str
    position: tuple[float, float]
    duration: float  # service seconds, travel added per chain


@dataclass(frozen=True)
class PlanItem:
    task: str
    start: float
    duration: float  # service plus approach travel


@dataclass(frozen=True)
class SearchParams:
    eta1: float = 0.1
    eta2: float = 5.0
    width: int = 8
    budget: int = 10000
    check_invariants: bool = False  # assert frontier non-domination per commit


@dataclass
class SearchContext:
    automata: dict[str, Nba]
    groups: list[GroupProfile]
    tasks: dict[str, TaskSite]
    precedence: frozenset[tuple[str, str]] = frozenset()
    params: SearchParams = field(default_factory=SearchParams)
    initial: Optional[dict[str, frozenset[int]]] = None

    def __post_init__(self) -> None:
        self._mission_ids = sorted(self.automata)
        self._group_ids = [g.id for g in sorted(self.groups, key=lambda g: g.id)]
        self._group_by_id = {g.id: g for g in self.groups}
        # symbol enablement per automaton state, for the label {symbol}
        self._enabled: dict[str, dict[int, frozenset[str]]] = {}
        for mid in self._mission_ids:
            a = self.automata[mid]
            per_state = {}
            for q in range(a.n_states):
                syms = set()
                for guard, _ in a.successors(q):
                    for sym in a.alphabet:
                        if guard.pos <= {sym} and sym not in guard.neg:
                            syms.add(sym)
                per_state[q] = frozenset(syms)
            self._enabled[mid] = per_state

    def mission_ids(self) -> list[str]:
        return self._mission_ids

    def group_ids(self) -> list[str]:
        return self._group_ids


@dataclass
class SearchNode:
    plans: tuple[tuple[PlanItem, ...], ...]  # aligned with sorted group ids
    reachable: tuple[frozenset[int], ...]  # aligned with sorted mission ids
    zeta: tuple[float, ...]
    chi: float
    creation: int
    parent: Optional[int]
    appended: Optional[tuple[str, str]] = None  # (group, task) that created it
    expanded: bool = False

    def assigned(self) -> frozenset[str]:
        return frozenset(item.task for plan in self.plans for item in plan)

    def partition_key(self) -> tuple:
        """Per-group task sets plus chain tails; nodes sharing this key lead
        to identical future travel and candidate structure."""
        return tuple(
            (frozenset(i.task for i in plan), plan[-1].task if plan else None)
            for plan in self.plans)

    def completions(self) -> dict[str, float]:
        return {i.task: i.start + i.duration
                for plan in self.plans for i in plan}


def prunes(keeper: SearchNode, other: SearchNode) -> bool:
    """Sound pruning test: ``keeper`` makes ``other`` redundant.

    Profile dominance alone can discard optimal branches (the profile carries
    no chain tail positions, per-task completion times, or automaton detail),
    so pruning additionally demands the same per-group task partition and
    chain tails, no-later completion per task, and no-smaller reachable sets.
    Any extension of ``other`` then applies verbatim to ``keeper`` with a
    value at least as good.
    """
    if keeper.partition_key() != other.partition_key():
        return False
    if any(a > b for a, b in zip(keeper.zeta, other.zeta)):
        return False
    oc = other.completions()
    for task, done in keeper.completions().items():
        if done > oc[task]:
            return False
    return all(rk >= ro for rk, ro in zip(keeper.reachable, other.reachable))


@dataclass
class ExpansionRecord:
    creation: int
    parent: Optional[int]
    group: Optional[str]
    task: Optional[str]
    zeta: tuple[float, ...]
    chi: float
    status: str  # kept | dominated | dead_end | infeasible_schedule
    dominator: Optional[int] = None  # creation index of the pruning node


@dataclass
class SearchResult:
    plans: dict[str, list[PlanItem]]
    chi: float
    complete: bool
    task_sequence: list[tuple[str, str]]  # (group, task) in expansion order
    nodes_created: int
    trace: list[ExpansionRecord]
    incumbent_history: list[float]


def dominates(z1: Sequence[float], z2: Sequence[float]) -> bool:
    """Element-wise <= with strict improvement somewhere."""
    if len(z1) != len(z2):
        raise ValueError("profile dimension mismatch")
    z1t, z2t = tuple(z1), tuple(z2)
    return z1t != z2t and all(a <= b for a, b in zip(z1t, z2t))


def node_value(zeta: Sequence[float], n_groups: int, eta1: float,
               eta2: float) -> float:
    """chi(v): makespan + weighted cost + weighted mission distances."""
    t_part = max(zeta[:n_groups]) if n_groups else 0.0
    c_part = sum(zeta[n_groups:2 * n_groups])
    d_part = sum(zeta[2 * n_groups:])
    if math.isinf(d_part):
        return math.inf
    return t_part + eta1 * c_part + eta2 * d_part


def travel_time(a: tuple[float, float], b: tuple[float, float],
                velocity: float) -> float:
    return math.dist(a, b) / velocity


def schedule_start_times(
    plans: dict[str, list[tuple[str, float]]],
    precedence: frozenset[tuple[str, str]],
) -> tuple[dict[str, float], dict[str, float]]:
    """Earliest-start schedule for per-group chains under cross-group precedence.

    ``plans`` maps a group to its ordered (task, duration) chain; tasks must be
    globally unique.  Returns per-task start times and per-group makespans.
    Raises :class:`ScheduleInfeasible` on a precedence cycle.
    """
    durations: dict[str, float] = {}
    owner: dict[str, str] = {}
    edges: dict[str, list[str]] = {}
    for gid in sorted(plans):
        chain = plans[gid]
        for i, (task, dur) in enumerate(chain):
            if task in durations:
                raise ScheduleInfeasible(f"task {task} appears twice")
            durations[task] = dur
            owner[task] = gid
            edges.setdefault(task, [])
            if i > 0:
                edges.setdefault(chain[i - 1][0], []).append(task)
    for up, down in sorted(precedence):
        if up in durations and down in durations:
            edges.setdefault(up, []).append(down)

    indeg = {t: 0 for t in durations}
    for outs in edges.values():
        for t in outs:
            indeg[t] += 1
    ready = sorted(t for t, d in indeg.items() if d == 0)
    starts = {t: 0.0 for t in durations}
    done = 0
    while ready:
        t = ready.pop(0)
        done += 1
        finish = starts[t] + durations[t]
        for succ in sorted(edges.get(t, [])):
            if starts[succ] < finish:
                starts[succ] = finish
            indeg[succ] -= 1
            if indeg[succ] == 0:
                ready.append(succ)
        ready.sort()
    if done != len(durations):
        raise ScheduleInfeasible("precedence cycle across plans")

    makespans = {gid: 0.0 for gid in plans}
    for task, start in starts.items():
        gid = owner[task]
        end = start + durations[task]
        if end > makespans[gid]:
            makespans[gid] = end
    return starts, makespans


def _chain_durations(ctx: SearchContext, group: GroupProfile,
                     tasks: Sequence[str]) -> list[tuple[str, float]]:
    """Fold approach-travel into each task's duration along the group chain."""
    out = []
    pos = group.home
    for symbol in tasks:
        site = ctx.tasks[symbol]
        dur = site.duration + travel_time(pos, site.position, group.velocity)
        out.append((symbol, dur))
        pos = site.position
    return out


def evaluate_plans(
    ctx: SearchContext,
    seqs: dict[str, list[str]],
    reachable: dict[str, frozenset[int]],
) -> tuple[tuple[tuple[PlanItem, ...], ...], tuple[float, ...], float]:
    """Profile and value of explicit plans; recomputed from scratch.

    Shared by the search and by the exhaustive oracle so that equal plans give
    bit-identical values.
    """
    group_ids = ctx.group_ids()
    mission_ids = ctx.mission_ids()
    chains = {gid: _chain_durations(ctx, _group(ctx, gid), seqs.get(gid, []))
              for gid in group_ids}
    starts, makespans = schedule_start_times(chains, ctx.precedence)
    plan_items = []
    costs = []
    for gid in group_ids:
        items = tuple(PlanItem(task, starts[task], dur)
                      for task, dur in chains[gid])
        plan_items.append(items)
        costs.append(sum(dur for _, dur in chains[gid]))
    dists = []
    for mid in mission_ids:
        dists.append(min_distance(ctx.automata[mid], reachable[mid]))
    zeta = tuple(makespans[gid] for gid in group_ids) + tuple(costs) + tuple(dists)
    chi = node_value(zeta, len(group_ids), ctx.params.eta1, ctx.params.eta2)
    return tuple(plan_items), zeta, chi


def _group(ctx: SearchContext, gid: str) -> GroupProfile:
    return ctx._group_by_id[gid]


def candidate_tasks(ctx: SearchContext, node: SearchNode, gid: str) -> list[str]:
    """Tasks enabled by some mission transition, executable and unassigned."""
    group = _group(ctx, gid)
    assigned = node.assigned()
    out: set[str] = set()
    for mi, mid in enumerate(ctx.mission_ids()):
        a = ctx.automata[mid]
        symbols = (a.alphabet & group.capabilities) - assigned - out
        if not symbols:
            continue
        enabled = ctx._enabled[mid]
        for q in node.reachable[mi]:
            out |= symbols & enabled[q]
    return sorted(out)


def _advance_all(ctx: SearchContext, node: SearchNode,
                 symbol: str) -> Optional[tuple[frozenset[int], ...]]:
    """Every mission observes every completed task; None when one dies."""
    label = frozenset([symbol])
    new_reach = []
    for mi, mid in enumerate(ctx.mission_ids()):
        nxt = ctx.automata[mid].step(node.reachable[mi], label)
        if not nxt:
            return None
        new_reach.append(nxt)
    return tuple(new_reach)


def expand(ctx: SearchContext, node: SearchNode, gid: str, task: str,
           creation: int) -> tuple[Optional[SearchNode], str]:
    """Child node for appending ``task`` to group ``gid``; None when discarded."""
    new_reach = _advance_all(ctx, node, task)
    if new_reach is None:
        return None, "dead_end"
    group_ids = ctx.group_ids()
    seqs = {g: [it.task for it in node.plans[i]] for i, g in enumerate(group_ids)}
    seqs[gid] = seqs[gid] + [task]
    try:
        plans, zeta, chi = evaluate_plans(
            ctx, seqs, dict(zip(ctx.mission_ids(), new_reach)))
    except ScheduleInfeasible:
        return None, "infeasible_schedule"
    child = SearchNode(plans, new_reach, zeta, chi, creation, node.creation,
                       appended=(gid, task))
    return child, "kept"


def is_complete(ctx: SearchContext, node: SearchNode) -> bool:
    mission_ids = ctx.mission_ids()
    for mi, mid in enumerate(mission_ids):
        if not (node.reachable[mi] & ctx.automata[mid].accepting):
            return False
    return node.assigned() == frozenset(ctx.tasks)


def _root(ctx: SearchContext) -> SearchNode:
    group_ids = ctx.group_ids()
    mission_ids = ctx.mission_ids()
    reach = []
    for mid in mission_ids:
        if ctx.initial and mid in ctx.initial:
            reach.append(frozenset(ctx.initial[mid]))
        else:
            reach.append(ctx.automata[mid].initial)
    seqs = {g: [] for g in group_ids}
    plans, zeta, chi = evaluate_plans(ctx, seqs, dict(zip(mission_ids, reach)))
    return SearchNode(plans, tuple(reach), zeta, chi, 0, None)


def _lower_bound(ctx: SearchContext, node: SearchNode) -> float:
    """Admissible bound on chi of any completion: times and costs only grow,
    and the final makespan covers at least an even split of remaining work."""
    n = len(ctx.group_ids())
    t_part = max(node.zeta[:n]) if n else 0.0
    c_part = sum(node.zeta[n:2 * n])
    remaining = sum(ctx.tasks[t].duration
                    for t in ctx.tasks if t not in node.assigned())
    if n:
        t_part = max(t_part, (c_part + remaining) / n)
    return t_part + ctx.params.eta1 * (c_part + remaining)


def search(ctx: SearchContext) -> SearchResult:
    """Run the guided tree search and return the incumbent assignment.

    Deterministic for identical inputs: ties in the value function break on
    node creation index, and children commit in a fixed group/task order.
    """
    for mid in ctx.mission_ids():
        if not ctx.automata[mid].has_accepting_run():
            from .automaton import InfeasibleSpecification
            raise InfeasibleSpecification(f"mission {mid} has empty language")

    root = _root(ctx)
    nodes: dict[int, SearchNode] = {0: root}
    # dominance is meaningful between nodes at equal assignment depth; an
    # ancestor otherwise shadows its own children whenever a step does not
    # lower a mission distance
    frontier: dict[int, list[SearchNode]] = {0: [root]}
    trace: list[ExpansionRecord] = []
    incumbent: Optional[SearchNode] = None
    incumbent_history: list[float] = []
    created = 1

    if is_complete(ctx, root):
        incumbent = root
        incumbent_history.append(root.chi)

    def all_frontier():
        for depth in sorted(frontier):
            yield from frontier[depth]

    while created < ctx.params.budget:
        cutoff = incumbent.chi if incumbent else math.inf
        selectable = [v for v in all_frontier()
                      if not v.expanded and not math.isinf(v.chi)
                      and _lower_bound(ctx, v) < cutoff]
        if not selectable:
            break
        selectable.sort(key=lambda v: (v.chi, v.creation))
        batch = selectable[:ctx.params.width]
        children: list[SearchNode] = []
        for v in batch:
            v.expanded = True
            for gid in ctx.group_ids():
                for task in candidate_tasks(ctx, v, gid):
                    child, status = expand(ctx, v, gid, task, creation=created)
                    if child is None:
                        trace.append(ExpansionRecord(
                            -1, v.creation, gid, task, (), math.inf, status))
                        continue
                    created += 1
                    children.append(child)
                    if created >= ctx.params.budget:
                        break
                if created >= ctx.params.budget:
                    break
            if created >= ctx.params.budget:
                break
        # commit in creation order with eager dominance filtering per depth
        for child, depth in ((c, len(c.assigned())) for c in children):
            nodes[child.creation] = child
            level = frontier.setdefault(depth, [])
            dominated_by = next((m for m in level if prunes(m, child)), None)
            if dominated_by is not None:
                trace.append(ExpansionRecord(
                    child.creation, child.parent, child.appended[0],
                    child.appended[1], child.zeta, child.chi, "dominated",
                    dominator=dominated_by.creation))
                continue
            level[:] = [m for m in level if not prunes(child, m)]
            level.append(child)
            trace.append(ExpansionRecord(
                child.creation, child.parent, child.appended[0],
                child.appended[1], child.zeta, child.chi, "kept"))
            if ctx.params.check_invariants:
                for m1 in level:
                    for m2 in level:
                        assert m1 is m2 or not prunes(m1, m2), \
                            "frontier members must be mutually irredundant"
            if is_complete(ctx, child):
                if incumbent is None or (child.chi, child.creation) < (
                        incumbent.chi, incumbent.creation):
                    incumbent = child
                    incumbent_history.append(child.chi)

    chosen = incumbent
    complete = chosen is not None
    if chosen is None:
        live = [v for v in all_frontier() if not math.isinf(v.chi)]
        live.sort(key=lambda v: (v.chi, v.creation))
        chosen = live[0] if live else root

    sequence: list[tuple[str, str]] = []
    cursor: Optional[SearchNode] = chosen
    while cursor is not None and cursor.appended is not None:
        sequence.append(cursor.appended)
        cursor = nodes.get(cursor.parent) if cursor.parent is not None else None
    sequence.reverse()

    group_ids = ctx.group_ids()
    plans = {gid: list(chosen.plans[i]) for i, gid in enumerate(group_ids)}
    return SearchResult(
        plans=plans,
        chi=chosen.chi,
        complete=complete,
        task_sequence=sequence,
        nodes_created=created,
        trace=trace,
        incumbent_history=incumbent_history,
    )
