"""Linear temporal logic: syntax tree, parser, normal forms and word semantics.

Formulas are immutable trees built from the constructors below.  The concrete
text syntax uses ``! && || -> X U <> []`` with parenthesized grouping and
proposition identifiers matching ``[a-z_][a-z0-9_]*``.  Semantics are evaluated
on lasso words (finite prefix followed by an infinitely repeated loop), which
double as the independent oracle for the automaton translation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

TRUE_KIND = "true"
FALSE_KIND = "false"
AP = "ap"
NOT = "not"
AND = "and"
OR = "or"
IMPLIES = "implies"
NEXT = "next"
UNTIL = "until"
EVENTUALLY = "eventually"
ALWAYS = "always"

_UNARY = (NOT, NEXT, EVENTUALLY, ALWAYS)
_BINARY = (AND, OR, IMPLIES, UNTIL)
_TEMPORAL = (NEXT, UNTIL, EVENTUALLY, ALWAYS)


@dataclass(frozen=True)
class Formula:
    kind: str
    children: tuple["Formula", ...] = ()
    name: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind in _UNARY and len(self.children) != 1:
            raise ValueError(f"{self.kind} takes one operand")
        if self.kind in _BINARY and len(self.children) != 2:
            raise ValueError(f"{self.kind} takes two operands")
        if self.kind == AP and not self.name:
            raise ValueError("atomic proposition needs a name")

    def __str__(self) -> str:
        return fmt(self)

    def propositions(self) -> frozenset[str]:
        if self.kind == AP:
            return frozenset([self.name])
        out: set[str] = set()
        for c in self.children:
            out |= c.propositions()
        return frozenset(out)

    def subformulas(self) -> Iterator["Formula"]:
        """Postorder traversal; children before parents, no deduplication."""
        for c in self.children:
            yield from c.subformulas()
        yield self


TRUE = Formula(TRUE_KIND)
FALSE = Formula(FALSE_KIND)


def Ap(name: str) -> Formula:
    return Formula(AP, name=name)


def Not(f: Formula) -> Formula:
    return Formula(NOT, (f,))


def And(a: Formula, b: Formula) -> Formula:
    return Formula(AND, (a, b))


def Or(a: Formula, b: Formula) -> Formula:
    return Formula(OR, (a, b))


def Implies(a: Formula, b: Formula) -> Formula:
    return Formula(IMPLIES, (a, b))


def Next(f: Formula) -> Formula:
    return Formula(NEXT, (f,))


def Until(a: Formula, b: Formula) -> Formula:
    return Formula(UNTIL, (a, b))


def Eventually(f: Formula) -> Formula:
    return Formula(EVENTUALLY, (f,))


def Always(f: Formula) -> Formula:
    return Formula(ALWAYS, (f,))


def conj(parts: list[Formula]) -> Formula:
    """Right-nested conjunction of ``parts``; TRUE when empty."""
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


# ---------------------------------------------------------------------------
# Printing

# Binding strength, loosest first.  ``U`` and ``->`` associate to the right,
# ``&&`` and ``||`` to the left; the printer parenthesizes anything the parser
# would not regroup identically, so parse(fmt(f)) == f.
_PREC = {IMPLIES: 1, OR: 2, AND: 3, UNTIL: 4,
         NOT: 5, NEXT: 5, EVENTUALLY: 5, ALWAYS: 5,
         AP: 6, TRUE_KIND: 6, FALSE_KIND: 6}
_OP_TEXT = {AND: "&&", OR: "||", IMPLIES: "->", UNTIL: "U"}
_UNARY_TEXT = {NOT: "!", NEXT: "X", EVENTUALLY: "<>", ALWAYS: "[]"}


def fmt(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, parent_prec: int) -> str:
    prec = _PREC[f.kind]
    if f.kind == AP:
        text = f.name
    elif f.kind == TRUE_KIND:
        text = "true"
    elif f.kind == FALSE_KIND:
        text = "false"
    elif f.kind in _UNARY:
        text = f"{_UNARY_TEXT[f.kind]} {_fmt(f.children[0], prec)}"
    else:
        a, b = f.children
        if f.kind in (IMPLIES, UNTIL):  # right associative
            left = _fmt(a, prec + 1)
            right = _fmt(b, prec)
        else:  # left associative
            left = _fmt(a, prec)
            right = _fmt(b, prec + 1)
        text = f"{left} {_OP_TEXT[f.kind]} {right}"
    if prec < parent_prec:
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Parsing


class LtlSyntaxError(ValueError):
    """Raised on malformed specification text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UndeclaredProposition(ValueError):
    def __init__(self, name: str, position: int):
        super().__init__(f"proposition '{name}' not declared (at position {position})")
        self.name = name
        self.position = position


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op>&&|\|\||->|<>|\[\]|[!()XU])|(?P<ident>[a-z_][a-z0-9_]*))"
)


@dataclass
class _Tokens:
    items: list[tuple[str, str, int]] = field(default_factory=list)
    pos: int = 0

    def peek(self) -> Optional[tuple[str, str, int]]:
        return self.items[self.pos] if self.pos < len(self.items) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.items[self.pos]
        self.pos += 1
        return tok


def _tokenize(text: str) -> _Tokens:
    toks = _Tokens()
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            stripped = text[i:].lstrip()
            if not stripped:
                break
            raise LtlSyntaxError(f"unexpected character {stripped[0]!r}",
                                 len(text) - len(stripped))
        if m.group("op"):
            toks.items.append(("op", m.group("op"), m.start("op")))
        else:
            toks.items.append(("ident", m.group("ident"), m.start("ident")))
        i = m.end()
    return toks


def parse_ltl(text: str, ap_decl: Optional[set[str]] = None) -> Formula:
    """Parse specification text into a Formula.

    When ``ap_decl`` is given, every proposition in the text must be a member;
    unknown names raise :class:`UndeclaredProposition`.
    """
    if not text or not text.strip():
        raise LtlSyntaxError("empty specification", 0)
    toks = _tokenize(text)
    f = _parse_implies(toks, ap_decl)
    left = toks.peek()
    if left is not None:
        raise LtlSyntaxError(f"unexpected trailing {left[1]!r}", left[2])
    return f


def _parse_implies(toks: _Tokens, decl) -> Formula:
    left = _parse_or(toks, decl)
    nxt = toks.peek()
    if nxt and nxt[1] == "->":
        toks.take()
        return Implies(left, _parse_implies(toks, decl))
    return left


def _parse_or(toks: _Tokens, decl) -> Formula:
    f = _parse_and(toks, decl)
    while True:
        nxt = toks.peek()
        if nxt and nxt[1] == "||":
            toks.take()
            f = Or(f, _parse_and(toks, decl))
        else:
            return f


def _parse_and(toks: _Tokens, decl) -> Formula:
    f = _parse_until(toks, decl)
    while True:
        nxt = toks.peek()
        if nxt and nxt[1] == "&&":
            toks.take()
            f = And(f, _parse_until(toks, decl))
        else:
            return f


def _parse_until(toks: _Tokens, decl) -> Formula:
    left = _parse_unary(toks, decl)
    nxt = toks.peek()
    if nxt and nxt[1] == "U":
        toks.take()
        return Until(left, _parse_until(toks, decl))
    return left


def _parse_unary(toks: _Tokens, decl) -> Formula:
    nxt = toks.peek()
    if nxt is None:
        raise LtlSyntaxError("unexpected end of input", _end_pos(toks))
    kind, value, pos = nxt
    if kind == "op" and value in ("!", "X", "<>", "[]"):
        toks.take()
        inner = _parse_unary(toks, decl)
        return {"!": Not, "X": Next, "<>": Eventually, "[]": Always}[value](inner)
    return _parse_atom(toks, decl)


def _parse_atom(toks: _Tokens, decl) -> Formula:
    nxt = toks.peek()
    if nxt is None:
        raise LtlSyntaxError("unexpected end of input", _end_pos(toks))
    kind, value, pos = toks.take()
    if kind == "ident":
        if value == "true":
            return TRUE
        if value == "false":
            return FALSE
        if decl is not None and value not in decl:
            raise UndeclaredProposition(value, pos)
        return Ap(value)
    if value == "(":
        f = _parse_implies(toks, decl)
        closing = toks.peek()
        if closing is None or closing[1] != ")":
            raise LtlSyntaxError("unbalanced parenthesis", pos)
        toks.take()
        return f
    raise LtlSyntaxError(f"unexpected token {value!r}", pos)


def _end_pos(toks: _Tokens) -> int:
    if toks.items:
        last = toks.items[-1]
        return last[2] + len(last[1])
    return 0


# ---------------------------------------------------------------------------
# Negation normal form

def to_nnf(f: Formula) -> Formula:
    """Equivalent formula with negation only directly above propositions.

    Implications are expanded and negated temporal operators are pushed inward
    using the standard dualities; the negated until is rewritten with the
    operators supported here:  ``!(a U b) == (!b U (!a && !b)) || [] !b``.
    """
    return _nnf(f, False)


def _nnf(f: Formula, negate: bool) -> Formula:
    k = f.kind
    if k == TRUE_KIND:
        return FALSE if negate else TRUE
    if k == FALSE_KIND:
        return TRUE if negate else FALSE
    if k == AP:
        return Not(f) if negate else f
    if k == NOT:
        return _nnf(f.children[0], not negate)
    if k == AND:
        a, b = f.children
        if negate:
            return Or(_nnf(a, True), _nnf(b, True))
        return And(_nnf(a, False), _nnf(b, False))
    if k == OR:
        a, b = f.children
        if negate:
            return And(_nnf(a, True), _nnf(b, True))
        return Or(_nnf(a, False), _nnf(b, False))
    if k == IMPLIES:
        a, b = f.children
        if negate:  # !(a -> b) == a && !b
            return And(_nnf(a, False), _nnf(b, True))
        return Or(_nnf(a, True), _nnf(b, False))
    if k == NEXT:
        return Next(_nnf(f.children[0], negate))
    if k == EVENTUALLY:
        if negate:
            return Always(_nnf(f.children[0], True))
        return Eventually(_nnf(f.children[0], False))
    if k == ALWAYS:
        if negate:
            return Eventually(_nnf(f.children[0], True))
        return Always(_nnf(f.children[0], False))
    if k == UNTIL:
        a, b = f.children
        if negate:
            na = _nnf(a, True)
            nb = _nnf(b, True)
            return Or(Until(nb, And(na, nb)), Always(nb))
        return Until(_nnf(a, False), _nnf(b, False))
    raise ValueError(f"unknown kind {k}")


def is_nnf(f: Formula) -> bool:
    if f.kind == NOT:
        return f.children[0].kind == AP
    if f.kind == IMPLIES:
        return False
    return all(is_nnf(c) for c in f.children)


def is_co_safe(f: Formula) -> bool:
    """True when the formula stays in the co-safe fragment.

    The check runs on the negation normal form and admits only Next, Until and
    Eventually among the temporal operators.
    """
    g = f if is_nnf(f) else to_nnf(f)
    return all(sub.kind != ALWAYS for sub in g.subformulas())


# ---------------------------------------------------------------------------
# Word semantics


@dataclass(frozen=True)
class LassoWord:
    """Ultimately periodic infinite word ``prefix . loop^omega``."""

    prefix: tuple[frozenset[str], ...]
    loop: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        if len(self.loop) < 1:
            raise ValueError("loop must be non-empty")

    @staticmethod
    def make(prefix, loop) -> "LassoWord":
        return LassoWord(tuple(frozenset(p) for p in prefix),
                         tuple(frozenset(p) for p in loop))

    @property
    def positions(self) -> int:
        return len(self.prefix) + len(self.loop)

    def label(self, i: int) -> frozenset[str]:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.loop[i - len(self.prefix)]

    def succ(self, i: int) -> int:
        j = i + 1
        return j if j < self.positions else len(self.prefix)


def satisfies(f: Formula, w: LassoWord) -> bool:
    """Standard LTL semantics on a lasso word.

    This is the independent oracle used to validate the automaton translation:
    temporal operators are resolved by walking the finitely many distinct
    positions of the word until the loop revisits itself.
    """
    memo: dict[tuple[Formula, int], bool] = {}
    return _holds(f, w, 0, memo)


def _holds(f: Formula, w: LassoWord, i: int, memo) -> bool:
    key = (f, i)
    if key in memo:
        return memo[key]
    k = f.kind
    if k == TRUE_KIND:
        v = True
    elif k == FALSE_KIND:
        v = False
    elif k == AP:
        v = f.name in w.label(i)
    elif k == NOT:
        v = not _holds(f.children[0], w, i, memo)
    elif k == AND:
        v = _holds(f.children[0], w, i, memo) and _holds(f.children[1], w, i, memo)
    elif k == OR:
        v = _holds(f.children[0], w, i, memo) or _holds(f.children[1], w, i, memo)
    elif k == IMPLIES:
        v = (not _holds(f.children[0], w, i, memo)) or _holds(f.children[1], w, i, memo)
    elif k == NEXT:
        v = _holds(f.children[0], w, w.succ(i), memo)
    elif k == UNTIL:
        a, b = f.children
        v = False
        j = i
        seen: set[int] = set()
        while j not in seen:
            seen.add(j)
            if _holds(b, w, j, memo):
                v = True
                break
            if not _holds(a, w, j, memo):
                break
            j = w.succ(j)
    elif k == EVENTUALLY:
        (c,) = f.children
        v = False
        j = i
        seen = set()
        while j not in seen:
            seen.add(j)
            if _holds(c, w, j, memo):
                v = True
                break
            j = w.succ(j)
    elif k == ALWAYS:
        (c,) = f.children
        v = True
        j = i
        seen = set()
        while j not in seen:
            seen.add(j)
            if not _holds(c, w, j, memo):
                v = False
                break
            j = w.succ(j)
    else:
        raise ValueError(f"unknown kind {k}")
    memo[key] = v
    return v


def all_lasso_words(props: list[str], max_prefix: int, max_loop: int) -> Iterator[LassoWord]:
    """Every lasso word over ``props`` with the given shape bounds."""
    labels = _all_labels(props)
    for plen in range(max_prefix + 1):
        for prefix in _tuples(labels, plen):
            for llen in range(1, max_loop + 1):
                for loop in _tuples(labels, llen):
                    yield LassoWord(prefix, loop)


def _all_labels(props: list[str]) -> list[frozenset[str]]:
    out = []
    for mask in range(1 << len(props)):
        out.append(frozenset(p for j, p in enumerate(props) if mask >> j & 1))
    return out


def _tuples(labels, n) -> Iterator[tuple]:
    if n == 0:
        yield ()
        return
    for rest in _tuples(labels, n - 1):
        for lab in labels:
            yield rest + (lab,)
