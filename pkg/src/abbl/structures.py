"""Explicit interval structures, compass structures and their checkers.

Intervals of a finite order ``0..n-1`` are pairs ``(x, y)`` with ``x < y``.
They are indexed row-major (by ``y``, then ``x``), which is also the order in
which the grid view of a structure is built and searched.

Semantics are evaluated with boolean numpy vectors over all intervals at once;
the batched form evaluates many labelings of the same order in one pass.
"""

from __future__ import annotations

import colorsys
import functools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from abbl.atoms import Atom, atom_mask_from_strings, DEP_M, is_atom
from abbl.formula import (
    RELATIONS, ClosureTable, Diamond, Formula, Not, Or, Prop, Rel, TOP_VAR,
    closure, iter_bits, normalize, parse, pretty, subformulas,
)

#: Largest number of (sub-formula, interval) cells model checking will allocate.
MODEL_CHECK_CAP = 50_000_000

Point = tuple[int, int]


# -- interval bookkeeping -------------------------------------------------------

@functools.lru_cache(maxsize=None)
def intervals(n: int) -> tuple[Point, ...]:
    """All intervals of ``0..n-1`` in row-major order."""
    return tuple((x, y) for y in range(1, n) for x in range(y))


def interval_index(x: int, y: int) -> int:
    return y * (y - 1) // 2 + x


def related(rel: Rel, p: Point, q: Point) -> bool:
    """``p rel q`` for the four Allen relations of the logic."""
    (x, y), (u, v) = p, q
    if rel is Rel.A:
        return y == u
    if rel is Rel.B:
        return x == u and v < y
    if rel is Rel.BI:
        return x == u and y < v
    return v < x


@functools.lru_cache(maxsize=64)
def relation_matrices(n: int) -> dict[Rel, np.ndarray]:
    """``M[r][i, j]`` is true when interval ``i`` is ``r``-related to ``j``."""
    iv = np.array(intervals(n), dtype=np.int64).reshape(-1, 2)
    x, y = iv[:, 0:1], iv[:, 1:2]
    u, v = iv[:, 0][None, :], iv[:, 1][None, :]
    mats = {
        Rel.A: y == u,
        Rel.B: (x == u) & (v < y),
        Rel.BI: (x == u) & (y < v),
        Rel.LI: v < x,
    }
    return {r: m.astype(np.float32) for r, m in mats.items()}


def evaluate(formulas: Iterable[Formula], n: int,
             var_values: Mapping[str, np.ndarray]) -> dict[Formula, np.ndarray]:
    """Truth of each formula (and its sub-formulas) on every interval.

    ``var_values[name]`` is a boolean array of shape ``(batch, m)`` with ``m``
    the number of intervals; missing variables are false everywhere.
    """
    m = len(intervals(n))
    batch = next(iter(var_values.values())).shape[0] if var_values else 1
    mats = relation_matrices(n)
    out: dict[Formula, np.ndarray] = {}
    false = np.zeros((batch, m), dtype=bool)
    for f in formulas:
        for g in subformulas(f):
            if g in out:
                continue
            if isinstance(g, Prop):
                out[g] = var_values.get(g.name, false)
            elif isinstance(g, Not):
                out[g] = ~out[g.child]
            elif isinstance(g, Or):
                out[g] = out[g.left] | out[g.right]
            else:
                child = out[g.child].astype(np.float32)
                out[g] = (child @ mats[g.rel].T) > 0
    return out


# -- explicit interval structures ---------------------------------------------

@dataclass(frozen=True)
class IntervalStructure:
    """A finite order ``0..n-1`` with a set of variables on every interval."""

    n: int
    sigma: Mapping[Point, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("an interval structure needs at least two points")
        sig = {}
        for (x, y), vs in self.sigma.items():
            if not 0 <= x < y < self.n:
                raise ValueError(f"({x},{y}) is not an interval of 0..{self.n - 1}")
            sig[(x, y)] = frozenset(vs)
        for p in intervals(self.n):
            sig.setdefault(p, frozenset())
        object.__setattr__(self, "sigma", sig)

    @property
    def vocabulary(self) -> list[str]:
        return sorted(set().union(*self.sigma.values()))

    def var_vectors(self, names: Iterable[str]) -> dict[str, np.ndarray]:
        iv = intervals(self.n)
        return {
            v: np.array([[v in self.sigma[p] for p in iv]], dtype=bool) for v in names
        }

    def evaluate(self, formulas: Iterable[Formula]) -> dict[Formula, np.ndarray]:
        formulas = list(formulas)
        names = {g.name for f in formulas for g in subformulas(f) if isinstance(g, Prop)}
        cells = len(intervals(self.n)) * sum(len(subformulas(f)) for f in formulas)
        if cells > MODEL_CHECK_CAP:
            raise MemoryError(f"model checking would need {cells} cells")
        return {f: v[0] for f, v in evaluate(formulas, self.n, self.var_vectors(names)).items()}

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "sigma": {f"{x},{y}": sorted(vs) for (x, y), vs in sorted(self.sigma.items()) if vs},
        }

    @classmethod
    def from_json(cls, data: dict) -> "IntervalStructure":
        return cls(int(data["n"]), {_point(k): frozenset(v) for k, v in data.get("sigma", {}).items()})


def _point(key: str) -> Point:
    x, y = key.split(",")
    return int(x), int(y)


def _check_interval(S: IntervalStructure, I: Point) -> None:
    x, y = I
    if not 0 <= x < y < S.n:
        raise IndexError(f"interval [{x},{y}] is outside 0..{S.n - 1}")


def model_check(S: IntervalStructure, I: Point, f: Formula) -> bool:
    """Whether ``S, I |= f``."""
    _check_interval(S, I)
    f = normalize(f)
    return bool(S.evaluate([f])[f][interval_index(*I)])


def all_types(S: IntervalStructure, table: ClosureTable) -> dict[Point, int]:
    """The type (as an atom mask) of every interval of ``S``."""
    vals = S.evaluate(table.formulas)
    rows = np.stack([vals[f] for f in table.formulas])  # width x m
    weights = [1 << i for i in range(table.width)]
    out = {}
    for k, p in enumerate(intervals(S.n)):
        col = rows[:, k]
        out[p] = sum(w for w, b in zip(weights, col) if b)
    return out


def type_of(S: IntervalStructure, I: Point, table: ClosureTable) -> Atom:
    """The set of closure formulas true at ``I``."""
    _check_interval(S, I)
    return Atom(all_types(S, table)[I], table)


# -- compass structures ----------------------------------------------------------

class Violation(NamedTuple):
    """One failed check: the point, the relation and what went wrong."""

    point: Point
    relation: str
    other: Point | None
    formula: str

    def __str__(self) -> str:
        where = f"({self.point[0]},{self.point[1]})"
        if self.other is not None:
            return f"{where} {self.relation} ({self.other[0]},{self.other[1]}): dependency fails"
        return f"{where} {self.relation}: {self.formula}"


@dataclass
class CompassStructure:
    """A triangular grid of points ``(x, y)``, ``x < y < n``, labelled with atoms.

    ``origin`` records the integer coordinate of grid column/row 0 when the
    structure is a window on an infinite one.
    """

    n: int
    labels: dict[Point, int]
    table: ClosureTable
    origin: int = 0

    def __post_init__(self):
        for p in intervals(self.n):
            if p not in self.labels:
                raise ValueError(f"point {p} has no label")

    def __getitem__(self, p: Point) -> int:
        return self.labels[p]

    def atom(self, x: int, y: int) -> Atom:
        return Atom(self.labels[(x, y)], self.table)

    def points(self) -> tuple[Point, ...]:
        return intervals(self.n)

    def row(self, y: int) -> list[int]:
        return [self.labels[(x, y)] for x in range(y)]

    def restrict(self, n: int) -> "CompassStructure":
        """The sub-structure on rows below ``n``."""
        return CompassStructure(n, {p: self.labels[p] for p in intervals(n)}, self.table, self.origin)

    def obs(self, p: Point) -> int:
        return self.table.profile(self.labels[p])[0]

    def to_json(self) -> dict:
        data = {
            "n": self.n,
            "formula": pretty(self.table.formula),
            "closure": self.table.kind,
            "labels": {f"{x},{y}": self.table.decode_str(m) for (x, y), m in sorted(self.labels.items())},
        }
        if self.origin:
            data["origin"] = self.origin
        return data

    @classmethod
    def from_json(cls, data: dict, table: ClosureTable | None = None) -> "CompassStructure":
        if table is None:
            table = closure(parse(data["formula"]), data.get("closure", "full"))
        labels = {_point(k): atom_mask_from_strings(v, table) for k, v in data["labels"].items()}
        return cls(int(data["n"]), labels, table, int(data.get("origin", 0)))

    def to_dot(self) -> str:
        return compass_to_dot(self)


def _dep_cache(table: ClosureTable):
    cache: dict[tuple, bool] = {}

    def dep(rel: Rel, f: int, g: int) -> bool:
        key = (rel, f, g)
        r = cache.get(key)
        if r is None:
            r = cache[key] = DEP_M[rel](table, f, g)
        return r

    return dep


def check_consistency(G: CompassStructure) -> list[Violation]:
    """Labels that are not atoms, and pairs ``p R q`` (R in A, B, Li) whose
    labels break the dependency."""
    dep = _dep_cache(G.table)
    pts = G.points()
    out = [Violation(p, "atom", None, "label is not locally consistent")
           for p in pts if not is_atom(G.labels[p], G.table)]
    for p in pts:
        x, y = p
        f = G.labels[p]
        for q in pts:
            u, v = q
            g = G.labels[q]
            if y == u and not dep(Rel.A, f, g):
                out.append(Violation(p, "A", q, ""))
            if x == u and v < y and not dep(Rel.B, f, g):
                out.append(Violation(p, "B", q, ""))
            if v < x and not dep(Rel.LI, f, g):
                out.append(Violation(p, "Li", q, ""))
    return sorted(out, key=_violation_key)


def _violation_key(v: Violation):
    order = {"atom": -1, "A": 0, "B": 1, "Bi": 2, "Li": 3}
    return (v.point[1], v.point[0], order.get(v.relation, 9), v.other or (-1, -1), v.formula)


def _obs_indexes(G: CompassStructure):
    """Unions of observables used to test fulfillment in constant time per point."""
    n = G.n
    obs = {p: G.obs(p) for p in G.points()}
    # column x, rows above y: suffix unions; rows below y: prefix unions
    above = {}
    below = {}
    for x in range(n - 1):
        acc = 0
        for y in range(n - 1, x, -1):
            above[(x, y)] = acc
            acc |= obs[(x, y)]
        acc = 0
        for y in range(x + 1, n):
            below[(x, y)] = acc
            acc |= obs[(x, y)]
    col_all = [0] * n  # union over points starting at x
    for (x, y), o in obs.items():
        col_all[x] |= o
    rows_below = [0] * (n + 1)  # union over points with y' < x
    row_obs = [0] * n
    for (x, y), o in obs.items():
        row_obs[y] |= o
    for x in range(1, n + 1):
        rows_below[x] = rows_below[x - 1] | row_obs[x - 1]
    return above, below, col_all, rows_below


def check_fulfillment(G: CompassStructure) -> list[Violation]:
    """Requests with no related point observing the requested formula."""
    above, below, col_all, rows_below = _obs_indexes(G)
    t = G.table
    out = []
    for p in G.points():
        x, y = p
        _, ra, rb, rbi, rli = t.profile(G.labels[p])
        avail = {
            "A": col_all[y],
            "B": below[p],
            "Bi": above[p],
            "Li": rows_below[x],
        }
        for name, req in (("A", ra), ("B", rb), ("Bi", rbi), ("Li", rli)):
            for a in iter_bits(req & ~avail[name]):
                out.append(Violation(p, name, None, pretty(t.formulas[a])))
    return sorted(out, key=_violation_key)


def features(G: CompassStructure, f: Formula) -> bool:
    """Whether some point's label contains ``f``."""
    i = G.table.lookup(f)
    return any(m >> i & 1 for m in G.labels.values())


def verify_model(G: CompassStructure, f: Formula | None = None,
                 at: Point | None = None) -> list[str]:
    """All problems with ``G`` as a finite model: inconsistency, unfulfilled
    requests, and (optionally) ``f`` not featured (at ``at`` if given)."""
    problems = [f"consistency: {v}" for v in check_consistency(G)]
    problems += [f"fulfillment: {v}" for v in check_fulfillment(G)]
    if f is not None:
        i = G.table.lookup(f)
        if at is not None:
            if not G.labels[at] >> i & 1:
                problems.append(f"featuring: {pretty(f)} not at {at}")
        elif not features(G, f):
            problems.append(f"featuring: {pretty(f)} not featured")
    return problems


class InvalidStructure(ValueError):
    """A compass structure failed a check it was required to pass."""

    def __init__(self, message: str, violations: list):
        super().__init__(message + ": " + "; ".join(str(v) for v in violations[:5]))
        self.violations = violations


def compass_from_interval(S: IntervalStructure, table: ClosureTable) -> CompassStructure:
    """Label every point with the type of the matching interval."""
    return CompassStructure(S.n, all_types(S, table), table)


def interval_from_compass(G: CompassStructure) -> IntervalStructure:
    """Read the variables off a consistent and fulfilling compass structure."""
    bad = check_consistency(G) + check_fulfillment(G)
    if bad:
        raise InvalidStructure("not a consistent and fulfilling compass structure", bad)
    return IntervalStructure(G.n, {p: G.table.props_of(m) for p, m in G.labels.items()})


# -- DOT ------------------------------------------------------------------------

def _colour(mask: int) -> str:
    h = (hash(mask) * 2654435761 % 2 ** 32) / 2 ** 32
    r, g, b = colorsys.hsv_to_rgb(h, 0.45, 0.95)
    return "#%02x%02x%02x" % (int(r * 255), int(g * 255), int(b * 255))


def compass_to_dot(G: CompassStructure, name: str = "compass") -> str:
    """Graphviz source with one node per point, placed on the half grid."""
    ids = {}
    lines = [f"graph {name} {{", "  node [shape=circle, style=filled, fontsize=9];"]
    for p in G.points():
        m = G.labels[p]
        ids.setdefault(m, len(ids))
        x, y = p
        shown = ", ".join(s for s in G.table.decode_str(m & G.table.cl_mask) if not s.startswith("~"))
        lines.append(
            f'  "{x},{y}" [pos="{x},{y}!", fillcolor="{_colour(m)}", '
            f'label="F{ids[m]}", tooltip="{shown}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
