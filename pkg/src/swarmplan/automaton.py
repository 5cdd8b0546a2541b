"""Nondeterministic Buchi automata: reachability, distances and task posets.

Automata are immutable after construction.  Transition guards are predicates
over propositions (required-true and required-false sets) rather than an
explicit exponential alphabet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable


class InfeasibleSpecification(ValueError):
    """The automaton has no accepting run at all."""


@dataclass(frozen=True)
class Guard:
    """Conjunction of literals: all of ``pos`` true and all of ``neg`` false."""

    pos: frozenset[str] = frozenset()
    neg: frozenset[str] = frozenset()

    def satisfiable(self) -> bool:
        return not (self.pos & self.neg)

    def satisfied_by(self, label: frozenset[str]) -> bool:
        return self.pos <= label and not (self.neg & label)

    def __str__(self) -> str:
        lits = sorted(self.pos) + [f"!{p}" for p in sorted(self.neg)]
        return " && ".join(lits) if lits else "true"


TRUE_GUARD = Guard()


@dataclass(frozen=True)
class Nba:
    """Buchi automaton (Q, Q0, Sigma, delta, QF) with guard-labeled transitions."""

    descriptors: tuple[str, ...]
    initial: frozenset[int]
    accepting: frozenset[int]
    alphabet: frozenset[str]
    transitions: tuple[tuple[int, Guard, int], ...]
    _adj: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        n = len(self.descriptors)
        for q in self.initial | self.accepting:
            if not 0 <= q < n:
                raise ValueError(f"state {q} out of range")
        adj: dict[int, list[tuple[Guard, int]]] = {q: [] for q in range(n)}
        for src, guard, dst in self.transitions:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError("transition endpoint out of range")
            if not guard.satisfiable():
                raise ValueError("unsatisfiable guard must be pruned at construction")
            adj[src].append((guard, dst))
        object.__setattr__(self, "_adj", adj)

    @property
    def n_states(self) -> int:
        return len(self.descriptors)

    def successors(self, q: int) -> list[tuple[Guard, int]]:
        return self._adj[q]

    def step(self, states: Iterable[int], label: frozenset[str]) -> frozenset[int]:
        out: set[int] = set()
        for q in states:
            for guard, dst in self._adj[q]:
                if guard.satisfied_by(label):
                    out.add(dst)
        return frozenset(out)

    def distances(self) -> dict[int, float]:
        """Hop distance from each state to the nearest accepting state."""
        if "dist" in self._adj and isinstance(self._adj.get("dist"), dict):
            return self._adj["dist"]
        rev: dict[int, set[int]] = {q: set() for q in range(self.n_states)}
        for src, _, dst in self.transitions:
            rev[dst].add(src)
        dist = {q: math.inf for q in range(self.n_states)}
        frontier = sorted(self.accepting)
        for q in frontier:
            dist[q] = 0
        d = 0
        while frontier:
            d += 1
            nxt = []
            for q in frontier:
                for p in sorted(rev[q]):
                    if dist[p] == math.inf:
                        dist[p] = d
                        nxt.append(p)
            frontier = nxt
        self._adj["dist"] = dist
        return dist

    def accepts(self, word) -> bool:
        """Membership of a lasso word, decided on the loop product graph."""
        reach = set(self.initial)
        for label in word.prefix:
            reach = self.step(reach, label)
            if not reach:
                return False
        good = self._accepting_loop_starts(tuple(word.loop))
        return bool(reach & good)

    def _accepting_loop_starts(self, loop: tuple[frozenset[str], ...]) -> frozenset[int]:
        """States from which reading ``loop`` forever admits an accepting run."""
        cache = self._adj.setdefault("loopcache", {})
        if loop in cache:
            return cache[loop]
        llen = len(loop)
        n = self.n_states

        def node(i: int, q: int) -> int:
            return i * n + q

        edges: dict[int, list[int]] = {}
        for i in range(llen):
            label = loop[i]
            j = (i + 1) % llen
            for q in range(n):
                outs = [node(j, dst) for guard, dst in self._adj[q]
                        if guard.satisfied_by(label)]
                edges[node(i, q)] = outs
        sccs = _tarjan(range(llen * n), edges)
        good_nodes: set[int] = set()
        for comp in sccs:
            comp_set = set(comp)
            nontrivial = len(comp) > 1 or any(
                v in edges.get(v, ()) for v in comp)
            if not nontrivial:
                continue
            if any((v % n) in self.accepting for v in comp):
                good_nodes |= comp_set
        # states that can reach a good node
        can = set(good_nodes)
        changed = True
        while changed:
            changed = False
            for v, outs in edges.items():
                if v not in can and any(o in can for o in outs):
                    can.add(v)
                    changed = True
        result = frozenset(q for q in range(n) if node(0, q) in can)
        cache[loop] = result
        return result

    def has_accepting_run(self) -> bool:
        live = live_states(self)
        return bool(self.initial & live)


def _tarjan(nodes, edges) -> list[list[int]]:
    """Iterative Tarjan strongly connected components."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(edges.get(root, ())))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(edges.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def live_states(a: Nba) -> frozenset[int]:
    """States with some accepting continuation (reach an accepting cycle)."""
    edges = {q: [dst for _, dst in a.successors(q)] for q in range(a.n_states)}
    sccs = _tarjan(range(a.n_states), edges)
    seeds: set[int] = set()
    for comp in sccs:
        nontrivial = len(comp) > 1 or any(v in edges.get(v, ()) for v in comp)
        if nontrivial and any(q in a.accepting for q in comp):
            seeds |= set(comp)
    live = set(seeds)
    changed = True
    while changed:
        changed = False
        for q in range(a.n_states):
            if q not in live and any(d in live for d in edges[q]):
                live.add(q)
                changed = True
    return frozenset(live)


# ---------------------------------------------------------------------------
# Reachable-state tracking


@dataclass(frozen=True)
class ReachableSet:
    mission: str
    states: frozenset[int]

    @staticmethod
    def initial(mission: str, a: Nba) -> "ReachableSet":
        return ReachableSet(mission, a.initial)


def advance(a: Nba, r: ReachableSet, obs: frozenset[str]) -> ReachableSet:
    """One observation step; an empty result signals a specification violation."""
    return ReachableSet(r.mission, a.step(r.states, frozenset(obs)))


def distance_to_accept(a: Nba, q: int) -> float:
    """Hops from ``q`` to the nearest accepting state; inf when unreachable."""
    if not 0 <= q < a.n_states:
        raise ValueError(f"state {q} not in automaton")
    return a.distances()[q]


def min_distance(a: Nba, states: Iterable[int]) -> float:
    dist = a.distances()
    best = math.inf
    for q in states:
        if dist[q] < best:
            best = dist[q]
    return best


# ---------------------------------------------------------------------------
# Relaxed partial order extraction


@dataclass(frozen=True)
class RPoset:
    tasks: frozenset[str]
    precedence: frozenset[tuple[str, str]]
    exclusion: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        order = {t: i for i, t in enumerate(sorted(self.tasks))}
        for h, l in self.precedence:
            if h not in order or l not in order:
                raise ValueError("precedence over unknown task")
        if _has_cycle(self.tasks, self.precedence):
            raise ValueError("precedence relation is cyclic")
        for a, b in self.exclusion:
            if a == b:
                raise ValueError("exclusion must be irreflexive")
            if (b, a) not in self.exclusion:
                raise ValueError("exclusion must be symmetric")


def _has_cycle(nodes, edges) -> bool:
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
    color: dict[str, int] = {}

    def visit(n: str) -> bool:
        color[n] = 1
        for m in adj[n]:
            c = color.get(m, 0)
            if c == 1:
                return True
            if c == 0 and visit(m):
                return True
        color[n] = 2
        return False

    return any(color.get(n, 0) == 0 and visit(n) for n in sorted(adj))


def extract_rposet(a: Nba, tasks: set[str]) -> RPoset:
    """Derive precedence and exclusion among ``tasks`` from the automaton.

    A transition "carries" a task when its guard requires the task proposition.
    The precedence pair (h, l) is emitted when no accepting run sees the first
    l-carrying transition strictly before the first h-carrying one, while some
    accepting run orders them the other way; absent tasks count as infinitely
    late.  Exclusion pairs never share a transition step on any accepting run.
    Exact via product exploration of (state, tasks-seen) over live states.
    """
    task_list = sorted(tasks)
    live = live_states(a)
    if not (a.initial & live):
        raise InfeasibleSpecification("automaton language is empty")

    idx = {t: i for i, t in enumerate(task_list)}
    k = len(task_list)
    # strictly_before[l][h]: some accepting run has first(l) < first(h)
    strictly_before = [[False] * k for _ in range(k)]
    together = [[False] * k for _ in range(k)]

    start_states = sorted(a.initial & live)
    seen_nodes: set[tuple[int, int]] = set()
    stack: list[tuple[int, int]] = [(q, 0) for q in start_states]
    for node in stack:
        seen_nodes.add(node)
    while stack:
        q, seen_mask = stack.pop()
        for guard, dst in a.successors(q):
            if dst not in live:
                continue
            carried = [idx[t] for t in task_list if t in guard.pos]
            new_mask = seen_mask
            for c in carried:
                new_mask |= 1 << c
            for ci in carried:
                for cj in carried:
                    if ci != cj:
                        together[ci][cj] = True
                for h in range(k):
                    if h == ci:
                        continue
                    if not (seen_mask >> h & 1) and not (new_mask >> h & 1):
                        # ci first-occurs (or re-occurs) while h unseen
                        if not (seen_mask >> ci & 1):
                            strictly_before[ci][h] = True
            node = (dst, new_mask)
            if node not in seen_nodes:
                seen_nodes.add(node)
                stack.append(node)

    precedence: set[tuple[str, str]] = set()
    for h in range(k):
        for l in range(k):
            if h == l:
                continue
            if not strictly_before[l][h] and strictly_before[h][l]:
                precedence.add((task_list[h], task_list[l]))
    exclusion: set[tuple[str, str]] = set()
    for i in range(k):
        for j in range(i + 1, k):
            if together[i][j]:
                continue
            ti, tj = task_list[i], task_list[j]
            if (ti, tj) in precedence or (tj, ti) in precedence:
                continue
            exclusion.add((ti, tj))
            exclusion.add((tj, ti))
    return RPoset(frozenset(task_list), frozenset(precedence), frozenset(exclusion))


# ---------------------------------------------------------------------------
# Task DAG


@dataclass(frozen=True)
class TaskDag:
    nodes: tuple[str, ...]
    precedence_edges: frozenset[tuple[str, str]]
    exclusion_edges: frozenset[tuple[str, str]]  # unordered pairs stored (min, max)

    def to_dot(self) -> str:
        lines = ["digraph tasks {"]
        for n in self.nodes:
            lines.append(f'  "{n}";')
        for a, b in sorted(self.precedence_edges):
            lines.append(f'  "{a}" -> "{b}" [label="precedes"];')
        for a, b in sorted(self.exclusion_edges):
            lines.append(f'  "{a}" -> "{b}" [label="excludes", dir="none", style="dashed"];')
        lines.append("}")
        return "\n".join(lines)

    def to_edge_list(self) -> str:
        """Plain node/edge list consumed by the console and docs tooling."""
        lines = [f"node {n}" for n in self.nodes]
        for a, b in sorted(self.precedence_edges):
            lines.append(f"edge {a} {b} precedes")
        for a, b in sorted(self.exclusion_edges):
            lines.append(f"edge {a} {b} excludes")
        return "\n".join(lines)


def rposet_to_dag(p: RPoset) -> TaskDag:
    """Transitive reduction of the precedence relation plus exclusion annotations."""
    nodes = tuple(sorted(p.tasks))
    edges = set(p.precedence)
    # reachability without the direct edge; drop implied edges
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
    reduced = set()
    for a, b in sorted(edges):
        if not _reaches_without(adj, a, b):
            reduced.add((a, b))
    excl = frozenset((min(a, b), max(a, b)) for a, b in p.exclusion)
    return TaskDag(nodes, frozenset(reduced), excl)


def _reaches_without(adj, a, b) -> bool:
    """Is b reachable from a via a path of length >= 2?"""
    stack = [n for n in adj[a] if n != b]
    seen = set(stack)
    while stack:
        n = stack.pop()
        if b in adj[n] or b == n:
            return True
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return False
