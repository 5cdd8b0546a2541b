"""Bulk agreement checking between automata and LTL word semantics.

Enumerating every lasso word up to a shape bound explodes quickly, so this
module shares work across words: oracle truth values are propagated backward
through prefixes with memoized one-step expansions, automaton reachability is
propagated forward, and loops collapse into equivalence classes keyed by their
loop-start truth vector and accepting-loop-start states.  The per-word oracle
here agrees with :func:`swarmplan.ltl.satisfies` (tested property), it just
amortizes the evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .automaton import Nba
from .ltl import (ALWAYS, AND, AP, EVENTUALLY, FALSE_KIND, IMPLIES, NEXT, NOT,
                  OR, TRUE_KIND, UNTIL, Formula, LassoWord, satisfies)


@dataclass
class AgreementReport:
    formula: Formula
    words_checked: int
    mismatches: list[tuple[LassoWord, bool, bool]]  # word, oracle, automaton

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _indexed_subformulas(f: Formula) -> list[Formula]:
    seen: dict[Formula, int] = {}
    out: list[Formula] = []
    for sub in f.subformulas():
        if sub not in seen:
            seen[sub] = len(out)
            out.append(sub)
    return out


class _BulkOracle:
    """Truth vectors over a formula's subformulas, one step at a time."""

    def __init__(self, f: Formula):
        self.subs = _indexed_subformulas(f)
        self.index = {s: i for i, s in enumerate(self.subs)}
        self.root = self.index[f]

    def loop_start_vector(self, loop: tuple[frozenset[str], ...]) -> int:
        w = LassoWord((), loop)
        memo: dict = {}
        from .ltl import _holds
        tv = 0
        for i, sub in enumerate(self.subs):
            if _holds(sub, w, 0, memo):
                tv |= 1 << i
        return tv

    def step_back(self, label: frozenset[str], tv_next: int) -> int:
        """Truth vector at a position given its label and the next position's."""
        tv = 0
        for i, sub in enumerate(self.subs):
            k = sub.kind
            if k == TRUE_KIND:
                bit = 1
            elif k == FALSE_KIND:
                bit = 0
            elif k == AP:
                bit = 1 if sub.name in label else 0
            elif k == NOT:
                bit = 1 ^ (tv >> self.index[sub.children[0]] & 1)
            elif k == AND:
                a, b = sub.children
                bit = (tv >> self.index[a] & 1) & (tv >> self.index[b] & 1)
            elif k == OR:
                a, b = sub.children
                bit = (tv >> self.index[a] & 1) | (tv >> self.index[b] & 1)
            elif k == IMPLIES:
                a, b = sub.children
                bit = (1 ^ (tv >> self.index[a] & 1)) | (tv >> self.index[b] & 1)
            elif k == NEXT:
                bit = tv_next >> self.index[sub.children[0]] & 1
            elif k == UNTIL:
                a, b = sub.children
                bit = (tv >> self.index[b] & 1) | (
                    (tv >> self.index[a] & 1) & (tv_next >> i & 1))
            elif k == EVENTUALLY:
                (c,) = sub.children
                bit = (tv >> self.index[c] & 1) | (tv_next >> i & 1)
            elif k == ALWAYS:
                (c,) = sub.children
                bit = (tv >> self.index[c] & 1) & (tv_next >> i & 1)
            else:
                raise ValueError(k)
            tv |= bit << i
        return tv


def oracle_satisfies(f: Formula, w: LassoWord) -> bool:
    """Backward-propagation evaluator; used to cross-check satisfies()."""
    bulk = _BulkOracle(f)
    tv = bulk.loop_start_vector(tuple(w.loop))
    for label in reversed(w.prefix):
        tv = bulk.step_back(label, tv)
    return bool(tv >> bulk.root & 1)


def check_agreement(f: Formula, a: Nba, props: list[str],
                    max_prefix: int = 4, max_loop: int = 2,
                    max_mismatches: int = 10) -> AgreementReport:
    """Compare automaton acceptance with word semantics on every lasso word
    over ``props`` with prefix length <= max_prefix and loop length <= max_loop.
    """
    props = sorted(props)
    labels = []
    for mask in range(1 << len(props)):
        labels.append(frozenset(p for j, p in enumerate(props) if mask >> j & 1))
    nlab = len(labels)

    offsets = [0]
    for length in range(max_prefix + 1):
        offsets.append(offsets[-1] + nlab ** length)
    n_prefixes = offsets[-1]

    loops: list[tuple[int, ...]] = []
    for llen in range(1, max_loop + 1):
        loops.extend(_index_tuples(nlab, llen))

    bulk = _BulkOracle(f)
    memo_step: dict[tuple[int, int], int] = {}

    def step(label_ix: int, tv: int) -> int:
        key = (label_ix, tv)
        got = memo_step.get(key)
        if got is None:
            got = bulk.step_back(labels[label_ix], tv)
            memo_step[key] = got
        return got

    # loop classes keyed by (loop-start truth vector, accepting-loop-start mask)
    classes: dict[tuple[int, int], list[tuple[int, ...]]] = {}
    for loop in loops:
        loop_labels = tuple(labels[i] for i in loop)
        tv0 = bulk.loop_start_vector(loop_labels)
        als = a._accepting_loop_starts(loop_labels)
        als_mask = 0
        for q in als:
            als_mask |= 1 << q
        classes.setdefault((tv0, als_mask), []).append(loop)

    # oracle bits per distinct loop-start vector, prefixes extended leftward
    root = bulk.root
    oracle_bits: dict[int, bytearray] = {}
    for tv0 in {tv for tv, _ in classes}:
        bits = bytearray(n_prefixes)
        stack = [(0, 0, tv0)]
        while stack:
            value, length, tv = stack.pop()
            bits[offsets[length] + value] = tv >> root & 1
            if length < max_prefix:
                weight = nlab ** length
                for li in range(nlab):
                    stack.append((li * weight + value, length + 1, step(li, tv)))
        oracle_bits[tv0] = bits

    # automaton reachable-set masks, prefixes extended rightward
    rows: list[list[int]] = []
    for li in range(nlab):
        row = []
        for q in range(a.n_states):
            m = 0
            for guard, dst in a.successors(q):
                if guard.satisfied_by(labels[li]):
                    m |= 1 << dst
            row.append(m)
        rows.append(row)
    memo_img: dict[tuple[int, int], int] = {}

    def image(label_ix: int, mask: int) -> int:
        key = (label_ix, mask)
        got = memo_img.get(key)
        if got is None:
            got = 0
            row = rows[label_ix]
            m = mask
            while m:
                low = m & -m
                got |= row[low.bit_length() - 1]
                m ^= low
            memo_img[key] = got
        return got

    init_mask = 0
    for q in a.initial:
        init_mask |= 1 << q
    reach = [0] * n_prefixes
    stack2 = [(0, 0, init_mask)]
    while stack2:
        value, length, mask = stack2.pop()
        reach[offsets[length] + value] = mask
        if length < max_prefix:
            for li in range(nlab):
                stack2.append((value * nlab + li, length + 1, image(li, mask)))

    mismatches: list[tuple[LassoWord, bool, bool]] = []
    words = 0
    for (tv0, als_mask), class_loops in sorted(classes.items()):
        bits = oracle_bits[tv0]
        words += len(class_loops) * n_prefixes
        for idx in range(n_prefixes):
            nbit = 1 if reach[idx] & als_mask else 0
            if bits[idx] != nbit:
                prefix = _decode_prefix(idx, offsets, nlab, labels)
                for loop in class_loops[:1]:
                    w = LassoWord(prefix, tuple(labels[i] for i in loop))
                    mismatches.append((w, bool(bits[idx]), bool(nbit)))
                if len(mismatches) >= max_mismatches:
                    return AgreementReport(f, words, mismatches)
    return AgreementReport(f, words, mismatches)


def _index_tuples(n: int, length: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = [()]
    for _ in range(length):
        out = [t + (i,) for t in out for i in range(n)]
    return out


def _decode_prefix(idx, offsets, nlab, labels) -> tuple[frozenset[str], ...]:
    length = 0
    while offsets[length + 1] <= idx:
        length += 1
    value = idx - offsets[length]
    digits = []
    for _ in range(length):
        digits.append(value % nlab)
        value //= nlab
    digits.reverse()
    return tuple(labels[d] for d in digits)


def spot_check(f: Formula, a: Nba, words: list[LassoWord]) -> list[LassoWord]:
    """Direct per-word comparison with satisfies(); returns disagreeing words."""
    bad = []
    for w in words:
        if satisfies(f, w) != a.accepts(w):
            bad.append(w)
    return bad
