"""Tableau-style translation from LTL to nondeterministic Buchi automata.

On-the-fly node expansion builds a generalized automaton whose acceptance sets
come from the until-type subformulas; a counter construction degeneralizes it
and a bisimulation quotient plus liveness pruning keeps desk-scale automata
small.  Translation aborts with a size report when the configured state budget
is exceeded.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automaton import Guard, Nba, live_states
from .ltl import (ALWAYS, AND, AP, EVENTUALLY, FALSE, FALSE_KIND, IMPLIES,
                  NEXT, NOT, OR, TRUE, TRUE_KIND, UNTIL, Always, And,
                  Eventually, Formula, Next, Or, Until, fmt, is_nnf, to_nnf)

DEFAULT_STATE_BUDGET = 4096


class TranslationBudgetExceeded(RuntimeError):
    def __init__(self, phase: str, size: int, budget: int):
        super().__init__(
            f"automaton translation aborted: {phase} reached {size} states "
            f"with budget {budget}")
        self.phase = phase
        self.size = size
        self.budget = budget


def simplify(f: Formula) -> Formula:
    """Cheap bottom-up rewriting: constant folding plus idempotence."""
    kids = tuple(simplify(c) for c in f.children)
    k = f.kind
    if k == AND:
        a, b = kids
        if a == FALSE or b == FALSE:
            return FALSE
        if a == TRUE:
            return b
        if b == TRUE:
            return a
        if a == b:
            return a
        return And(a, b)
    if k == OR:
        a, b = kids
        if a == TRUE or b == TRUE:
            return TRUE
        if a == FALSE:
            return b
        if b == FALSE:
            return a
        if a == b:
            return a
        return Or(a, b)
    if k == UNTIL:
        a, b = kids
        if b in (TRUE, FALSE):
            return b
        if a == FALSE:
            return b
        if a == TRUE:
            return Eventually(b)
        return Until(a, b)
    if k == EVENTUALLY:
        (c,) = kids
        if c.kind in (TRUE_KIND, FALSE_KIND):
            return c
        if c.kind == EVENTUALLY:
            return c
        return Eventually(c)
    if k == ALWAYS:
        (c,) = kids
        if c.kind in (TRUE_KIND, FALSE_KIND):
            return c
        if c.kind == ALWAYS:
            return c
        return Always(c)
    if k == NEXT:
        (c,) = kids
        if c.kind in (TRUE_KIND, FALSE_KIND):
            return c
        return Next(c)
    if kids != f.children:
        return Formula(k, kids, f.name)
    return f


_INIT = -1

# Expansion steps allowed per unit of state budget before aborting; bounds the
# runtime of hopeless translations whose branching explodes before any state
# completes.
_WORK_FACTOR = 200


@dataclass
class _Node:
    name: int
    incoming: set[int]
    new: set[Formula]
    old: set[Formula]
    nxt: set[Formula]


class _FormulaOrder:
    """Stable deterministic ordering of formulas, cached per translation."""

    def __init__(self) -> None:
        self._ranks: dict[Formula, tuple[str, str]] = {}

    def key(self, f: Formula):
        got = self._ranks.get(f)
        if got is None:
            got = (f.kind, fmt(f))
            self._ranks[f] = got
        return got


def _negated_literal(f: Formula) -> Formula:
    if f.kind == NOT:
        return f.children[0]
    return Formula(NOT, (f,))


def translate_to_nba(f: Formula, state_budget: int = DEFAULT_STATE_BUDGET) -> Nba:
    """Build an automaton whose language matches the formula on lasso words."""
    g = simplify(f if is_nnf(f) else to_nnf(f))
    alphabet = g.propositions()

    nodes: dict[int, _Node] = {}
    by_key: dict[tuple[frozenset, frozenset], int] = {}
    counter = [0]
    order_cache = _FormulaOrder()
    work_limit = state_budget * _WORK_FACTOR
    work = 0

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    pending = [_Node(fresh(), {_INIT}, {g} if g != TRUE else set(), set(), set())]
    while pending:
        work += 1
        if work > work_limit:
            raise TranslationBudgetExceeded("tableau expansion", len(nodes),
                                            state_budget)
        node = pending.pop()
        if not node.new:
            key = (frozenset(node.old), frozenset(node.nxt))
            if key in by_key:
                nodes[by_key[key]].incoming |= node.incoming
                continue
            by_key[key] = node.name
            nodes[node.name] = node
            if len(nodes) > state_budget:
                raise TranslationBudgetExceeded("tableau expansion", len(nodes),
                                                state_budget)
            pending.append(_Node(fresh(), {node.name}, set(node.nxt), set(), set()))
            continue
        h = min(node.new, key=order_cache.key)
        node.new.discard(h)
        k = h.kind
        if k == TRUE_KIND:
            pending.append(node)
        elif k == FALSE_KIND:
            continue  # contradiction: drop this branch
        elif k == AP or (k == NOT and h.children[0].kind == AP):
            if _negated_literal(h) in node.old:
                continue
            node.old.add(h)
            pending.append(node)
        elif k == AND:
            a, b = h.children
            node.old.add(h)
            for part in (a, b):
                if part not in node.old:
                    node.new.add(part)
            pending.append(node)
        elif k == OR:
            a, b = h.children
            left = _clone(node, fresh())
            left.old.add(h)
            if a not in left.old:
                left.new.add(a)
            right = node
            right.old.add(h)
            if b not in right.old:
                right.new.add(b)
            pending.append(left)
            pending.append(right)
        elif k == UNTIL:
            a, b = h.children
            defer = _clone(node, fresh())
            defer.old.add(h)
            if a not in defer.old:
                defer.new.add(a)
            defer.nxt.add(h)
            now = node
            now.old.add(h)
            if b not in now.old:
                now.new.add(b)
            pending.append(defer)
            pending.append(now)
        elif k == EVENTUALLY:
            (c,) = h.children
            defer = _clone(node, fresh())
            defer.old.add(h)
            defer.nxt.add(h)
            now = node
            now.old.add(h)
            if c not in now.old:
                now.new.add(c)
            pending.append(defer)
            pending.append(now)
        elif k == ALWAYS:
            (c,) = h.children
            node.old.add(h)
            if c not in node.old:
                node.new.add(c)
            node.nxt.add(h)
            pending.append(node)
        elif k == NEXT:
            (c,) = h.children
            node.old.add(h)
            node.nxt.add(c)
            pending.append(node)
        elif k == IMPLIES:
            a, b = h.children
            node.new.add(Or(to_nnf(Formula(NOT, (a,))), b))
            pending.append(node)
        else:
            raise ValueError(f"unexpected kind {k}")

    order = sorted(nodes)
    fairness = sorted(
        {s for s in g.subformulas() if s.kind in (UNTIL, EVENTUALLY)},
        key=order_cache.key)
    f_sets: list[frozenset[int]] = []
    for u in fairness:
        rhs = u.children[1] if u.kind == UNTIL else u.children[0]
        f_sets.append(frozenset(
            n for n in order
            if u not in nodes[n].old or rhs in nodes[n].old))
    if not f_sets:
        f_sets = [frozenset(order)]
    kk = len(f_sets)

    def guard_of(n: int) -> Guard:
        pos, neg = set(), set()
        for lit in nodes[n].old:
            if lit.kind == AP:
                pos.add(lit.name)
            elif lit.kind == NOT:
                neg.add(lit.children[0].name)
        return Guard(frozenset(pos), frozenset(neg))

    guards = {n: guard_of(n) for n in order}
    gba_succ: dict[int, list[int]] = {_INIT: []}
    for n in order:
        gba_succ[n] = []
    for n in order:
        for src in sorted(nodes[n].incoming):
            gba_succ[src].append(n)

    # Degeneralize: product with a fairness counter, reachable part only.
    start = (_INIT, 0)
    state_ix: dict[tuple[int, int], int] = {start: 0}
    state_list: list[tuple[int, int]] = [start]
    transitions: list[tuple[int, Guard, int]] = []
    frontier = [start]
    while frontier:
        nxt_frontier = []
        for (q, i) in frontier:
            i2 = (i + 1) % kk if (q != _INIT and q in f_sets[i]) else i
            for dst in gba_succ[q]:
                key2 = (dst, i2)
                if key2 not in state_ix:
                    state_ix[key2] = len(state_list)
                    state_list.append(key2)
                    if len(state_list) > state_budget:
                        raise TranslationBudgetExceeded(
                            "degeneralization", len(state_list), state_budget)
                    nxt_frontier.append(key2)
                transitions.append((state_ix[(q, i)], guards[dst], state_ix[key2]))
        frontier = nxt_frontier

    accepting = frozenset(
        ix for (q, i), ix in state_ix.items()
        if q != _INIT and i == 0 and q in f_sets[0])

    def descr(qi: tuple[int, int]) -> str:
        q, i = qi
        if q == _INIT:
            return "start"
        obligations = sorted(fmt(x) for x in nodes[q].nxt)
        body = "; ".join(obligations) if obligations else "no pending obligations"
        return body if kk == 1 else f"{body} [{i}]"

    raw = Nba(
        descriptors=tuple(descr(s) for s in state_list),
        initial=frozenset([0]),
        accepting=accepting,
        alphabet=alphabet,
        transitions=tuple(transitions),
    )
    return _minimize(raw)


def _clone(node: _Node, name: int) -> _Node:
    return _Node(name, set(node.incoming), set(node.new), set(node.old),
                 set(node.nxt))


def _minimize(a: Nba) -> Nba:
    live = live_states(a)
    keep = sorted(set(live) | set(a.initial))
    keep_set = set(keep)
    trans = [(s, g, d) for (s, g, d) in a.transitions
             if s in keep_set and d in keep_set]
    remap = {q: i for i, q in enumerate(keep)}
    a2 = Nba(
        descriptors=tuple(a.descriptors[q] for q in keep),
        initial=frozenset(remap[q] for q in a.initial),
        accepting=frozenset(remap[q] for q in a.accepting if q in keep_set),
        alphabet=a.alphabet,
        transitions=tuple((remap[s], g, remap[d]) for s, g, d in trans),
    )
    return _bisim_quotient(_tighten_acceptance(a2))


def _tighten_acceptance(a: Nba) -> Nba:
    """Language-preserving cleanup of the accepting set.

    Drops the flag from states on no cycle (a single visit can never matter)
    and flags every member of a universal sink component: a sink SCC whose
    states survive every label and whose non-accepting subgraph is acyclic
    accepts every continuation, so reaching it means the run is irrevocably
    good.  Keeps the reached-acceptance checks used by the monitor and the
    search crisp on good prefixes.
    """
    from .automaton import _tarjan

    edges = {q: [dst for _, dst in a.successors(q)] for q in range(a.n_states)}
    sccs = _tarjan(range(a.n_states), edges)
    comp_of: dict[int, int] = {}
    for ci, comp in enumerate(sccs):
        for q in comp:
            comp_of[q] = ci

    accepting = set(a.accepting)
    for q in list(accepting):
        comp = sccs[comp_of[q]]
        if len(comp) == 1 and q not in edges[q]:
            accepting.discard(q)

    universal: set[int] = set()
    for comp in sccs:
        comp_set = set(comp)
        if not any(q in a.accepting for q in comp):
            continue
        if any(dst not in comp_set for q in comp for dst in edges[q]):
            continue  # not a sink component
        if not all(_guards_cover(
                [g for g, dst in a.successors(q) if dst in comp_set])
                for q in comp):
            continue  # some label can fall out
        blank = [q for q in comp if q not in a.accepting]
        inner = {q: [d for d in edges[q] if d in comp_set
                     and d not in a.accepting] for q in blank}
        if _acyclic(blank, inner):
            universal |= comp_set
    # backward closure: a state whose every label surely re-enters the
    # universal set accepts every continuation as well
    changed = True
    while changed:
        changed = False
        for q in range(a.n_states):
            if q in universal:
                continue
            if _guards_cover([g for g, dst in a.successors(q)
                              if dst in universal]):
                universal.add(q)
                changed = True
    accepting |= universal

    if accepting == set(a.accepting):
        return a
    return Nba(a.descriptors, a.initial, frozenset(accepting), a.alphabet,
               a.transitions)


def _guards_cover(guards: list[Guard]) -> bool:
    """Does the disjunction of literal-conjunction guards cover every label?"""
    if any(not g.pos and not g.neg for g in guards):
        return True
    if not guards:
        return False
    props = sorted(set().union(*(g.pos | g.neg for g in guards)))
    p = props[0]

    def restrict(value: bool) -> list[Guard]:
        out = []
        for g in guards:
            if value and p in g.neg:
                continue
            if not value and p in g.pos:
                continue
            out.append(Guard(g.pos - {p}, g.neg - {p}))
        return out

    return _guards_cover(restrict(True)) and _guards_cover(restrict(False))


def _acyclic(nodes: list[int], edges: dict[int, list[int]]) -> bool:
    color: dict[int, int] = {}

    def visit(n: int) -> bool:
        color[n] = 1
        for m in edges.get(n, ()):
            if m not in color and not visit(m):
                return False
            if color.get(m) == 1:
                return False
        color[n] = 2
        return True

    return all(visit(n) for n in nodes if n not in color)


def _bisim_quotient(a: Nba) -> Nba:
    n = a.n_states
    cls = [1 if q in a.accepting else 0 for q in range(n)]
    while True:
        sigs: dict[tuple, int] = {}
        new_cls = [0] * n
        for q in range(n):
            sig = (cls[q], frozenset((g, cls[d]) for g, d in a.successors(q)))
            if sig not in sigs:
                sigs[sig] = len(sigs)
            new_cls[q] = sigs[sig]
        if new_cls == cls:
            break
        cls = new_cls
    n_classes = len(set(cls))
    if n_classes == n:
        return a
    members: dict[int, list[int]] = {}
    for q in range(n):
        members.setdefault(cls[q], []).append(q)
    # stable class numbering by smallest member state
    class_order = sorted(members, key=lambda c: min(members[c]))
    renum = {c: i for i, c in enumerate(class_order)}
    descriptors = tuple(
        min(a.descriptors[q] for q in members[c]) for c in class_order)
    initial = frozenset(renum[cls[q]] for q in a.initial)
    accepting = frozenset(renum[cls[q]] for q in a.accepting)
    transitions = sorted({
        (renum[cls[s]], g, renum[cls[d]]) for s, g, d in a.transitions},
        key=lambda t: (t[0], t[2], str(t[1])))
    return Nba(descriptors, initial, accepting, a.alphabet, tuple(transitions))
