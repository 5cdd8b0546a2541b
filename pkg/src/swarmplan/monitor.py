"""Execution monitoring: trace tracking against mission automata plus
poset-derived synchronization checks over observed start and end times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from .automaton import Nba, ReachableSet, advance, min_distance

PROGRESSING = "progressing"
ACCEPTING = "accepting"
VIOLATED = "violated"
UNREACHABLE = "unreachable"


@dataclass
class MissionTracker:
    mission: str
    automaton: Nba
    formula_text: str = ""
    reachable: ReachableSet = None  # type: ignore[assignment]
    trace: list[tuple[float, frozenset[str]]] = field(default_factory=list)
    distance_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.reachable is None:
            self.reachable = ReachableSet.initial(self.mission, self.automaton)
        if not self.distance_history:
            self.distance_history.append(
                min_distance(self.automaton, self.reachable.states))

    @property
    def distance(self) -> float:
        return self.distance_history[-1]


def observe(tr: MissionTracker, time: float,
            obs: frozenset[str]) -> str:
    """Advance the tracker by one observation; returns the new verdict.

    Time must be non-decreasing along the trace; emptiness of the reachable
    set is recorded, not raised.
    """
    if tr.trace and time < tr.trace[-1][0]:
        raise ValueError("observation times must be non-decreasing")
    label = frozenset(obs)
    tr.reachable = advance(tr.automaton, tr.reachable, label)
    tr.trace.append((time, label))
    tr.distance_history.append(
        min_distance(tr.automaton, tr.reachable.states))
    return verdict(tr)


def verdict(tr: MissionTracker) -> str:
    states = tr.reachable.states
    if not states:
        return VIOLATED
    if states & tr.automaton.accepting:
        return ACCEPTING
    if math.isinf(min_distance(tr.automaton, states)):
        return UNREACHABLE
    return PROGRESSING


def snapshot(tr: MissionTracker) -> dict:
    """Console view of the automaton with executed trace and distances."""
    a = tr.automaton
    dist = a.distances()
    return {
        "mission": tr.mission,
        "formula": tr.formula_text,
        "verdict": verdict(tr),
        "min_distance": _json_num(tr.distance),
        "states": [
            {
                "id": q,
                "descriptor": a.descriptors[q],
                "initial": q in a.initial,
                "accepting": q in a.accepting,
                "current": q in tr.reachable.states,
                "distance": _json_num(dist[q]),
            }
            for q in range(a.n_states)
        ],
        "transitions": [
            {"src": s, "dst": d, "guard": str(g)}
            for s, g, d in a.transitions
        ],
        "trace": [
            {"t_ms": int(round(t * 1000)), "label": sorted(label)}
            for t, label in tr.trace
        ],
        "distance_history": [_json_num(d) for d in tr.distance_history],
    }


def _json_num(x: float):
    return None if math.isinf(x) else x


# ---------------------------------------------------------------------------
# Synchronization rules


@dataclass(frozen=True)
class SyncRule:
    kind: str  # precedes | simultaneous
    upstream: str
    downstream: str

    def __post_init__(self) -> None:
        if self.kind not in ("precedes", "simultaneous"):
            raise ValueError(f"unknown sync rule kind {self.kind}")
        if self.kind == "precedes" and self.upstream == self.downstream:
            raise ValueError("precedes rule needs distinct tasks")


@dataclass(frozen=True)
class SyncViolation:
    rule: SyncRule
    detail: str


def check_sync(rules: list[SyncRule],
               schedule: dict[str, list[tuple[str, float, float]]]
               ) -> list[SyncViolation]:
    """Check observed (robot, start, end) triples against the rules.

    A precedes rule is violated when the latest start among the downstream
    executors falls before the earliest end among the upstream executors; a
    simultaneous rule demands exactly equal start times (the engine aligns
    synchronized starts, so equality is exact).  Pure function of the log.
    """
    out: list[SyncViolation] = []
    for rule in rules:
        down = schedule.get(rule.downstream, [])
        up = schedule.get(rule.upstream, [])
        if rule.kind == "precedes":
            if not down:
                continue  # downstream never ran; nothing to violate
            if not up:
                out.append(SyncViolation(
                    rule, f"{rule.downstream} ran but {rule.upstream} never did"))
                continue
            max_down_start = max(s for _, s, _ in down)
            min_up_end = min(e for _, _, e in up)
            if max_down_start < min_up_end:
                out.append(SyncViolation(
                    rule,
                    f"downstream start {max_down_start:.3f} precedes upstream "
                    f"end {min_up_end:.3f}"))
        else:
            starts = sorted({s for _, s, _ in up} | {s for _, s, _ in down})
            if len(starts) > 1:
                out.append(SyncViolation(
                    rule, f"start times differ: {starts}"))
    return out
