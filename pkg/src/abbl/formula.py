"""Formulas of the interval logic ABB̄L̄: AST, parser, printer and closure tables.

Only ``~``, ``|`` and the four diamonds are primitive.  Conjunction, boxes,
implication and the constants are desugared by the parser, so every formula
produced here is already in the normal form used by :func:`closure`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Union


class Rel(enum.Enum):
    """Allen relations available as modalities."""

    A = "A"
    B = "B"
    BI = "Bi"  # begun-by
    LI = "Li"  # before

    def __str__(self) -> str:
        return self.value


RELATIONS = (Rel.A, Rel.B, Rel.BI, Rel.LI)

#: Name of the reserved variable used to encode ``true``/``false``.
TOP_VAR = "_top"


@dataclass(frozen=True)
class Prop:
    name: str

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Diamond:
    rel: Rel
    child: "Formula"

    def __str__(self) -> str:
        return pretty(self)


Formula = Union[Prop, Not, Or, Diamond]

TOP: Formula = Or(Prop(TOP_VAR), Not(Prop(TOP_VAR)))
BOT: Formula = Not(TOP)


# -- constructors -----------------------------------------------------------

def neg(f: Formula) -> Formula:
    """Negation with double negations cancelled."""
    return f.child if isinstance(f, Not) else Not(f)


def disj(a: Formula, b: Formula) -> Formula:
    return Or(a, b)


def conj(a: Formula, b: Formula) -> Formula:
    return neg(Or(neg(a), neg(b)))


def implies(a: Formula, b: Formula) -> Formula:
    return Or(neg(a), b)


def diamond(rel: Rel, f: Formula) -> Formula:
    return Diamond(rel, f)


def box(rel: Rel, f: Formula) -> Formula:
    return neg(Diamond(rel, neg(f)))


def normalize(f: Formula) -> Formula:
    """Remove every ``~~`` pair, bottom-up."""
    if isinstance(f, Prop):
        return f
    if isinstance(f, Not):
        return neg(normalize(f.child))
    if isinstance(f, Or):
        return Or(normalize(f.left), normalize(f.right))
    return Diamond(f.rel, normalize(f.child))


def subformulas(f: Formula) -> list[Formula]:
    """Distinct sub-formulas of ``f`` in post-order (children first)."""
    seen: dict[Formula, None] = {}

    def walk(g: Formula) -> None:
        if g in seen:
            return
        if isinstance(g, Not):
            walk(g.child)
        elif isinstance(g, Or):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Diamond):
            walk(g.child)
        seen[g] = None

    walk(f)
    return list(seen)


def variables(f: Formula) -> list[str]:
    """Propositional variables of ``f``, sorted, the reserved one excluded."""
    names = {g.name for g in subformulas(f) if isinstance(g, Prop)}
    names.discard(TOP_VAR)
    return sorted(names)


def size(f: Formula) -> int:
    """Number of distinct sub-formulas."""
    return len(subformulas(f))


def modal_depth(f: Formula) -> int:
    if isinstance(f, Prop):
        return 0
    if isinstance(f, Not):
        return modal_depth(f.child)
    if isinstance(f, Or):
        return max(modal_depth(f.left), modal_depth(f.right))
    return 1 + modal_depth(f.child)


# -- printing ---------------------------------------------------------------

def pretty(f: Formula) -> str:
    """Render ``f`` in the ASCII surface syntax, re-sugaring where possible.

    ``parse(pretty(f)) == f`` for every normalized ``f``.
    """
    s = _pretty(f)
    if s.startswith("(") and (isinstance(f, Or) or isinstance(f, Not) and isinstance(f.child, Or)):
        return s[1:-1]  # no parentheses around the whole formula
    return s


def _pretty(f: Formula) -> str:
    if f == TOP:
        return "true"
    if f == BOT:
        return "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Or):
        return f"({_pretty(f.left)} | {_pretty(f.right)})"
    if isinstance(f, Diamond):
        return f"<{f.rel}> {_pretty(f.child)}"
    g = f.child
    if isinstance(g, Diamond):
        return f"[{g.rel}] {_pretty(neg(g.child))}"
    if isinstance(g, Or):
        return f"({_pretty(neg(g.left))} & {_pretty(neg(g.right))})"
    return f"~{_pretty(g)}"


# -- parsing ----------------------------------------------------------------

class FormulaSyntaxError(ValueError):
    """Malformed formula text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


_REL_NAMES = {
    "A": Rel.A,
    "B": Rel.B,
    "Bi": Rel.BI,
    "Li": Rel.LI,
    "B̄": Rel.BI,
    "L̄": Rel.LI,
    "B̅": Rel.BI,
    "L̅": Rel.LI,
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow>->|→)
  | (?P<diamond>(?:<|⟨)\s*(?P<drel>[A-Za-z][A-Za-z̄̅]*)\s*(?:>|⟩))
  | (?P<box>\[\s*(?P<brel>[A-Za-z][A-Za-z̄̅]*)\s*\])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[~&|()¬∧∨⊤⊥])
    """,
    re.VERBOSE,
)

_OP_ALIASES = {"¬": "~", "∧": "&", "∨": "|"}


@dataclass
class _Token:
    kind: str
    text: str
    pos: int
    rel: Rel | None = None


@dataclass
class _Parser:
    text: str
    tokens: list[_Token] = field(default_factory=list)
    i: int = 0

    def where(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def fail(self, message: str, pos: int | None = None):
        if pos is None:
            pos = self.tokens[self.i].pos if self.i < len(self.tokens) else len(self.text)
        raise FormulaSyntaxError(message, *self.where(pos))

    def tokenize(self) -> None:
        pos = 0
        while pos < len(self.text):
            m = _TOKEN_RE.match(self.text, pos)
            if m is None:
                if self.text[pos] in "<[⟨":
                    self.fail("unclosed modality", pos)
                self.fail(f"unexpected character {self.text[pos]!r}", pos)
            kind = m.lastgroup
            if kind in ("drel", "brel"):
                kind = "diamond" if m.group("diamond") else "box"
            if kind != "ws":
                tok = _Token(kind, m.group(0), pos)
                if kind in ("diamond", "box"):
                    name = m.group("drel") or m.group("brel")
                    rel = _REL_NAMES.get(name)
                    if rel is None:
                        self.fail(f"unknown operator {m.group(0).strip()!r}", pos)
                    tok.rel = rel
                elif kind == "op":
                    tok.text = _OP_ALIASES.get(tok.text, tok.text)
                elif kind == "arrow":
                    tok.kind, tok.text = "op", "->"
                tokens = self.tokens
                tokens.append(tok)
            pos = m.end()

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self) -> Formula:
        self.tokenize()
        if not self.tokens:
            self.fail("empty formula", 0)
        f = self.implication()
        if self.peek() is not None:
            self.fail(f"unexpected {self.peek().text!r}")
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.accept("|"):
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.accept("&"):
            f = conj(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        if tok.kind == "op" and tok.text == "~":
            self.i += 1
            return neg(self.unary())
        if tok.kind == "diamond":
            self.i += 1
            return Diamond(tok.rel, self.unary())
        if tok.kind == "box":
            self.i += 1
            return box(tok.rel, self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        self.i += 1
        if tok.kind == "name":
            if tok.text == "true":
                return TOP
            if tok.text == "false":
                return BOT
            if not re.fullmatch(r"[a-z][a-zA-Z0-9_]*", tok.text):
                self.fail(f"invalid variable name {tok.text!r}", tok.pos)
            return Prop(tok.text)
        if tok.kind == "op" and tok.text in ("⊤", "⊥"):
            return TOP if tok.text == "⊤" else BOT
        if tok.kind == "op" and tok.text == "(":
            f = self.implication()
            if not self.accept(")"):
                self.fail("expected ')'")
            return f
        self.fail(f"unexpected {tok.text!r}", tok.pos)


def parse(text: str) -> Formula:
    """Parse surface syntax into a desugared, normalized formula."""
    return _Parser(text).parse()


# -- closure tables ---------------------------------------------------------

class ClosureTable:
    """Indexed closure of a formula.

    Entries come in complementary pairs: index ``2*i`` holds a positive
    formula (not a negation) and ``2*i + 1`` its negation, so the negation
    partner of entry ``j`` is ``j ^ 1``.  The first ``n_cl`` entries form
    Cl(φ); the rest are diamonds ``<R>α`` with ``α`` in Cl(φ) and their
    negations.

    With ``kind="full"`` the table is the extended closure over all four
    relations.  ``kind="reduced"`` keeps only the extra diamonds the search
    engines need (``<B>α``/``<Bi>α`` for α requested by A, B or Bi in Cl),
    which keeps the atom space small without changing satisfiability.
    """

    def __init__(self, formula: Formula, kind: str = "full"):
        if kind not in ("full", "reduced"):
            raise ValueError(f"unknown closure kind {kind!r}")
        self.formula = normalize(formula)
        self.kind = kind
        subs = subformulas(self.formula)
        #: |φ|, the number of distinct sub-formulas.
        self.size = len(subs)

        positives: dict[Formula, None] = {}
        for g in subs:
            positives.setdefault(g.child if isinstance(g, Not) else g, None)
        cl_pos = list(positives)
        self.n_cl = 2 * len(cl_pos)
        entries: list[Formula] = []
        for g in cl_pos:
            entries += [g, Not(g)]
        index = {g: i for i, g in enumerate(entries)}

        # relevant request domains inside Cl
        rel_in_cl = {r: set() for r in RELATIONS}
        for g in cl_pos:
            if isinstance(g, Diamond):
                rel_in_cl[g.rel].add(index[g.child])
        if kind == "full":
            extra_domain = {r: set(range(self.n_cl)) for r in RELATIONS}
        else:
            column = rel_in_cl[Rel.A] | rel_in_cl[Rel.B] | rel_in_cl[Rel.BI]
            extra_domain = {
                Rel.A: set(rel_in_cl[Rel.A]),
                Rel.B: set(column),
                Rel.BI: set(column),
                Rel.LI: set(rel_in_cl[Rel.LI]),
            }
        for a in range(self.n_cl):
            for r in RELATIONS:
                if a in extra_domain[r]:
                    d = Diamond(r, entries[a])
                    if d not in index:
                        index[d] = len(entries)
                        index[Not(d)] = len(entries) + 1
                        entries += [d, Not(d)]
        self.formulas: tuple[Formula, ...] = tuple(entries)
        self.index: dict[Formula, int] = index
        self.width = len(entries)
        self.full_mask = (1 << self.width) - 1
        self.cl_mask = (1 << self.n_cl) - 1

        #: diamond_of[r][a] = table index of <r>α for Cl index a, when present
        self.diamond_of: dict[Rel, dict[int, int]] = {r: {} for r in RELATIONS}
        for j, g in enumerate(entries):
            if isinstance(g, Diamond):
                a = index[g.child]
                if a < self.n_cl:
                    self.diamond_of[g.rel][a] = j
        #: domain[r]: Cl-mask of the α whose R-request is tracked by atoms
        self.domain = {
            r: sum(1 << a for a in self.diamond_of[r]) for r in RELATIONS
        }
        self._profiles: dict[int, tuple[int, int, int, int, int]] = {}
        self._plan = self._evaluation_plan()

    def __len__(self) -> int:
        return self.width

    def __repr__(self) -> str:
        return f"ClosureTable({pretty(self.formula)!r}, kind={self.kind!r}, width={self.width})"

    @property
    def cl(self) -> tuple[Formula, ...]:
        return self.formulas[: self.n_cl]

    def neg_index(self, i: int) -> int:
        return i ^ 1

    def lookup(self, f: Formula) -> int:
        try:
            return self.index[normalize(f)]
        except KeyError:
            raise KeyError(f"{pretty(f)} is not in the closure table") from None

    def mask_of(self, formulas) -> int:
        m = 0
        for f in formulas:
            m |= 1 << self.lookup(f)
        return m

    def decode(self, mask: int) -> list[Formula]:
        return [self.formulas[i] for i in _bits(mask)]

    def decode_str(self, mask: int) -> list[str]:
        return sorted(pretty(f) for f in self.decode(mask))

    # -- per-atom set extraction --------------------------------------------

    def profile(self, mask: int) -> tuple[int, int, int, int, int]:
        """``(Obs, Req_A, Req_B, Req_Bi, Req_Li)`` as Cl-index bitmasks."""
        p = self._profiles.get(mask)
        if p is None:
            reqs = []
            for r in RELATIONS:
                m = 0
                for a, j in self.diamond_of[r].items():
                    if mask >> j & 1:
                        m |= 1 << a
                reqs.append(m)
            p = (mask & self.cl_mask, *reqs)
            self._profiles[mask] = p
        return p

    # -- building atoms from their free parts ---------------------------------

    def _evaluation_plan(self):
        plan = []
        for i in range(0, self.n_cl, 2):
            g = self.formulas[i]
            if isinstance(g, Prop):
                plan.append((i, "prop", g.name))
            elif isinstance(g, Or):
                plan.append((i, "or", (self.index[g.left], self.index[g.right])))
            else:
                plan.append((i, "dia", (g.rel, self.index[g.child])))
        return plan

    def complete(self, props: frozenset[str] | set[str], req_a: int, req_b: int,
                 req_bi: int, req_li: int) -> int:
        """The unique atom with the given true variables and request sets.

        Request masks are clipped to the tracked domains.
        """
        reqs = {Rel.A: req_a & self.domain[Rel.A], Rel.B: req_b & self.domain[Rel.B],
                Rel.BI: req_bi & self.domain[Rel.BI], Rel.LI: req_li & self.domain[Rel.LI]}
        mask = 0
        for i, kind, arg in self._plan:
            if kind == "prop":
                true = arg in props
            elif kind == "or":
                true = bool(mask >> arg[0] & 1 or mask >> arg[1] & 1)
            else:
                true = bool(reqs[arg[0]] >> arg[1] & 1)
            mask |= 1 << (i if true else i + 1)
        for r in RELATIONS:
            for a, j in self.diamond_of[r].items():
                if j >= self.n_cl:
                    mask |= 1 << (j if reqs[r] >> a & 1 else j + 1)
        return mask

    def props_of(self, mask: int) -> frozenset[str]:
        return frozenset(
            g.name for i, g in enumerate(self.formulas[: self.n_cl])
            if isinstance(g, Prop) and g.name != TOP_VAR and mask >> i & 1
        )


def closure(f: Formula, kind: str = "full") -> ClosureTable:
    """Closure table of ``f`` (see :class:`ClosureTable`)."""
    return ClosureTable(f, kind)


def _bits(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def iter_bits(mask: int) -> Iterator[int]:
    return _bits(mask)


def subsets(mask: int) -> Iterator[int]:
    """All sub-masks of ``mask``, starting from 0."""
    sub = 0
    while True:
        yield sub
        if sub == mask:
            return
        sub = (sub - mask) & mask
