"""Satisfiability procedures over finite orders and over the integers.

All three searches build compass structures row by row, bottom-up.  A row's
atoms are fixed by a small number of free choices:

* a point's B-requests and Li-requests are inherited from the point below it
  (vertically adjacent points are B-local), and its B̄-requests shrink by what
  it observes;
* every point of a row shares its A-requests, which must match what the unit
  point of the next row observes or B̄-requests;
* the Li-requests of a column are exactly what is observed in the rows that
  end before the column starts.

The searches work over the reduced closure (only the requests the formula can
see are tracked), and every SAT answer is re-checked on explicit structures.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from decimal import Context, Decimal
from typing import Iterator

import networkx as nx

from abbl.atoms import CapacityError, dep_a_m, dep_b_local_m
from abbl.formula import (
    BOT, TOP_VAR, ClosureTable, Diamond, Formula, Not, Or, Prop, Rel, box, closure, conj, normalize,
    iter_bits, pretty, size, subsets, variables,
)
from abbl.rows import (
    CompassGenerator, check_expandable, check_generator, check_partially_fulfilling,
    expand_generator, future_witness_set, past_witness_set,
)
from abbl.structures import (
    CompassStructure, IntervalStructure, check_consistency, compass_from_interval, intervals,
    verify_model,
)

log = logging.getLogger(__name__)

SAT = "SAT"
UNSAT_AT_BOUND = "UNSAT_AT_BOUND"
UNSAT = "UNSAT"


class VerificationError(AssertionError):
    """A SAT answer failed independent re-verification (a solver bug)."""


@dataclass
class SolverVerdict:
    status: str
    model: CompassStructure | CompassGenerator | None = None
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == SAT

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "model": None if self.model is None else self.model.to_json(),
            "stats": dict(self.stats),
        }


def xi_finite(phi: Formula) -> Formula:
    """Holds at the initial unit iff ``phi`` holds somewhere in a finite model."""
    return Or(Or(Or(phi, Diamond(Rel.BI, phi)), Diamond(Rel.A, phi)),
              Diamond(Rel.A, Diamond(Rel.A, phi)))


def xi_integers(phi: Formula) -> Formula:
    """Anchor formula for the integer search, evaluated at unit intervals."""
    return Or(Or(conj(phi, box(Rel.B, BOT)), Diamond(Rel.BI, phi)),
              Diamond(Rel.BI, Diamond(Rel.A, phi)))


# -- extended shadings and the successor relation -------------------------------

def cap_for(table: ClosureTable) -> int:
    return 8 * table.size + 14


@dataclass(frozen=True)
class ExtendedShading:
    """A row summary: its atoms with occurrence counts saturated at ``cap``."""

    counts: tuple[tuple[int, int], ...]
    table: ClosureTable
    cap: int

    @classmethod
    def of_row(cls, G: CompassStructure, y: int, cap: int | None = None) -> "ExtendedShading":
        cap = cap_for(G.table) if cap is None else cap
        c = Counter(G.labels[(x, y)] for x in range(y))
        return cls(tuple(sorted((f, min(k, cap)) for f, k in c.items())), G.table, cap)

    @property
    def atoms(self) -> frozenset[int]:
        return frozenset(f for f, _ in self.counts)

    @property
    def pi(self) -> int:
        return pi_atom(self.atoms, self.table)

    def validate(self) -> None:
        pi = self.pi
        if any(k < 1 for _, k in self.counts):
            raise ValueError("extended shading with a zero count")
        if dict(self.counts)[pi] > 1:
            raise ValueError("the unit atom occurs more than once")


def pi_atom(S, table: ClosureTable) -> int:
    """The unique atom of a row shading without B-requests."""
    units = [f for f in S if table.profile(f)[2] == 0]
    if len(units) != 1:
        raise ValueError(f"a row shading needs exactly one atom without B-requests, found {len(units)}")
    return units[0]


def _feasible_transfer(left: dict[int, int], right: dict[int, int], edges, cap: int) -> bool:
    """Is there a non-negative integer flow on ``edges`` whose left sums equal
    ``left`` and right sums equal ``right``?  A count equal to ``cap`` stands
    for "``cap`` or more"."""
    g = nx.DiGraph()
    big = (sum(left.values()) + sum(right.values()) + 1) * (cap + 1)
    demand = Counter()

    def bounded(u, v, lo, hi):
        demand[u] += lo
        demand[v] -= lo
        g.add_edge(u, v, capacity=hi - lo)

    for f, c in left.items():
        bounded("s", ("L", f), c, big if c >= cap else c)
    for h, c in right.items():
        bounded(("R", h), "t", c, big if c >= cap else c)
    for f, h in edges:
        g.add_edge(("L", f), ("R", h), capacity=big)
    g.add_edge("t", "s", capacity=big * 4)
    for node in g.nodes:
        g.nodes[node]["demand"] = demand[node]
    try:
        nx.network_simplex(g)
    except nx.NetworkXUnfeasible:
        return False
    return True


def successor(prev: ExtendedShading, nxt: ExtendedShading) -> bool:
    """Can ``nxt`` summarise the row right above a row summarised by ``prev``?

    (a) every non-unit atom above has a B-local partner below; (b) the counts
    can be transferred along B-local pairs; (c) every atom below meets the
    new unit atom in the A-relation.
    """
    if prev.table is not nxt.table:
        raise ValueError("extended shadings over different closure tables")
    t = prev.table
    prev.validate()
    nxt.validate()
    new_unit = nxt.pi
    below = dict(prev.counts)
    above = {f: c for f, c in nxt.counts if f != new_unit}
    edges = [(f, g) for f in above for g in below if dep_b_local_m(t, f, g)]
    if any(not any(e[0] == f for e in edges) for f in above):
        return False
    if not _feasible_transfer(above, below, edges, min(prev.cap, nxt.cap)):
        return False
    return all(dep_a_m(t, g, new_unit) for g in below)


# -- shared row kernel -----------------------------------------------------------

def _leaves(g: Formula, out: set) -> None:
    if isinstance(g, Not):
        _leaves(g.child, out)
    elif isinstance(g, Or):
        _leaves(g.left, out)
        _leaves(g.right, out)
    else:
        out.add(g)


def _eval(g: Formula, val: dict) -> bool:
    if isinstance(g, Not):
        return not _eval(g.child, val)
    if isinstance(g, Or):
        return _eval(g.left, val) or _eval(g.right, val)
    return val[g]


def _reachable_values(table: ClosureTable, choice_of, max_leaves: int) -> int:
    """Closure entries (either polarity) that some leaf assignment allows."""
    out = 0
    for i in range(0, table.n_cl, 2):
        g = table.formulas[i]
        leaves: set = set()
        _leaves(g, leaves)
        leaves = sorted(leaves, key=pretty)
        if len(leaves) > max_leaves:
            out |= 0b11 << i
            continue
        choices = []
        for leaf in leaves:
            if isinstance(leaf, Prop):
                choices.append((False,) if leaf.name == TOP_VAR else (False, True))
            else:
                choices.append(choice_of(leaf.rel, table.index[leaf.child]))
        for vals in itertools.product(*choices):
            out |= 1 << (i if _eval(g, dict(zip(leaves, vals))) else i + 1)
            if out >> i & 3 == 3:
                break
    return out


def observable_mask(table: ClosureTable, max_leaves: int = 14) -> int:
    """Closure entries that some atom can hold when it only requests entries
    that are themselves observable somewhere (a least fixpoint).

    Requests outside this set can never be fulfilled, so searches skip them.
    Formulas with too many boolean leaves are over-approximated as observable.
    """
    live = 0
    while True:
        new = _reachable_values(
            table, lambda r, j: (False, True) if live >> j & 1 else (False,), max_leaves)
        if new == live:
            return live
        live = new


class BudgetExceeded(CapacityError):
    """The search visited more nodes than its budget allows."""


class HeightBounds:
    """Per-height over-approximation of what a point can observe.

    The height of a point is the number of rows above it.  A point of height
    0 has no A- or B̄-requests; a point of height h > 0 can only request what
    points of smaller height observe, and must request whatever every point
    of height h-1 observes (the point above it and the unit of its end column
    have height h-1).
    """

    def __init__(self, table: ClosureTable, max_leaves: int = 14):
        self.table = table
        self.max_leaves = max_leaves
        self.live = observable_mask(table, max_leaves)
        self.always_live = 0
        for i in range(table.n_cl):
            if self.live >> i & 1 and not self.live >> (i ^ 1) & 1:
                self.always_live |= 1 << i
        self.obs: list[int] = []
        self.below: list[int] = [0]
        self.always: list[int] = []

    def _grow(self, h: int) -> None:
        t = self.table
        while len(self.obs) <= h:
            k = len(self.obs)
            below = self.below[k]
            must = self.always[k - 1] if k else 0

            def choice(r, j):
                if r in (Rel.A, Rel.BI):
                    if k == 0:
                        return (False,)
                    opts = (True,) if below >> j & 1 else ()
                    return opts + (() if must >> j & 1 else (False,))
                return (False, True) if self.live >> j & 1 else (False,)

            obs = _reachable_values(t, choice, self.max_leaves)
            always = 0
            for i in range(t.n_cl):
                if obs >> i & 1 and not obs >> (i ^ 1) & 1:
                    always |= 1 << i
            self.obs.append(obs)
            self.always.append(always)
            self.below.append(below | obs)

    def request_range(self, rel: Rel, h: int | None) -> tuple[int, int]:
        """(allowed, required) request masks for a point of height ``h``;
        ``None`` is an unbounded height (there are always rows above)."""
        dom = self.table.domain[rel]
        if h is None:
            return self.live & dom, self.always_live & dom
        self._grow(h)
        if h == 0:
            return 0, 0
        return self.below[h] & dom, self.always[h - 1] & dom

    def observable(self, i: int, h: int) -> bool:
        self._grow(h)
        return bool(self.obs[h] >> i & 1)


class _Kernel:
    """Candidate atoms for unit points and for points above a given atom, at
    a given height (rows left above the point)."""

    def __init__(self, table: ClosureTable, budget: int | None = None):
        self.t = table
        self.dA = table.domain[Rel.A]
        self.dB = table.domain[Rel.B]
        self.dBi = table.domain[Rel.BI]
        self.dLi = table.domain[Rel.LI]
        names = variables(table.formula)
        self.prop_sets = [
            frozenset(c) for k in range(len(names) + 1) for c in itertools.combinations(names, k)
        ]
        self.hb = HeightBounds(table)
        self.budget = budget
        self.nodes = 0
        self._units: dict = {}
        self._children: dict = {}

    def tick(self, k: int = 1) -> None:
        self.nodes += k
        if self.budget is not None and self.nodes > self.budget:
            raise BudgetExceeded(f"search budget of {self.budget} nodes exhausted")

    def _within(self, rel: Rel, h: int, base: int = -1) -> list[int]:
        allowed, required = self.hb.request_range(rel, h)
        if base != -1:
            allowed &= base
        if required & ~allowed:
            return []
        return [required | s for s in subsets(allowed & ~required)]

    def a_guesses(self, h: int) -> list[int]:
        return self._within(Rel.A, h)

    def units(self, li: int, a: int, h: int) -> list[int]:
        key = (li, a, h)
        out = self._units.get(key)
        if out is None:
            out = sorted({
                self.t.complete(ps, a, 0, bi, li)
                for bi in self._within(Rel.BI, h) for ps in self.prop_sets
            })
            self._units[key] = out
        return out

    def children(self, parent: int, a: int, h: int) -> list[int]:
        key = (parent, a, h)
        out = self._children.get(key)
        if out is None:
            t = self.t
            obs, _, rb, rbi, rli = t.profile(parent)
            b = (obs | rb) & self.dB
            out = set()
            for bi in self._within(Rel.BI, h, rbi):
                for ps in self.prop_sets:
                    m = t.complete(ps, a, b, bi, rli)
                    if ((t.profile(m)[0] | bi) & self.dBi) == rbi:
                        out.add(m)
            out = sorted(out)
            self._children[key] = out
        return out

    def a_of_unit(self, u: int) -> int:
        obs, _, _, rbi, _ = self.t.profile(u)
        return (obs | rbi) & self.dA

    def obs_li(self, m: int) -> int:
        return self.t.profile(m)[0] & self.dLi

    def req_a(self, m: int) -> int:
        return self.t.profile(m)[1]


def _verify_finite(table_formula: Formula, rows: dict, n: int, reduced: ClosureTable) -> CompassStructure:
    """Turn reduced labels into a model over the full closure and re-check it."""
    sigma = {p: reduced.props_of(m) for p, m in rows.items()}
    full = closure(table_formula, "full")
    G = compass_from_interval(IntervalStructure(n, sigma), full)
    problems = verify_model(G, table_formula, at=(0, 1))
    if problems:
        raise VerificationError("finite model failed re-verification: " + "; ".join(problems[:5]))
    return G


# -- explicit point-by-point search ------------------------------------------------

def sat_finite_explicit(f: Formula, max_n: int, budget: int | None = None) -> SolverVerdict:
    """Bounded search for a finite model with at most ``max_n`` points.

    Points are assigned one at a time, row by row from the bottom; rows whose
    continuation already failed are remembered.  Complete up to ``max_n``.
    """
    if max_n < 2:
        raise ValueError("max_n must be at least 2")
    start = time.perf_counter()
    f = normalize(f)
    xi = xi_finite(f)
    table = closure(xi, "reduced")
    k = _Kernel(table, budget)
    xi_i = table.index[xi]
    for n in range(2, max_n + 1):
        if not k.hb.observable(xi_i, n - 2):
            continue
        found = _explicit_rows(k, n, xi_i)
        if found is not None:
            model = _verify_finite(xi, found, n, table)
            return SolverVerdict(SAT, model, {"n": n, "rows": n - 1, "states": k.nodes,
                                              "seconds": time.perf_counter() - start})
    return SolverVerdict(UNSAT_AT_BOUND, None, {"n": max_n, "rows": max_n - 1, "states": k.nodes,
                                                "seconds": time.perf_counter() - start})


def _explicit_rows(k: _Kernel, n: int, xi_i: int) -> dict | None:
    labels: dict = {}
    dead: set = set()

    def row(y: int, prev: tuple[int, ...], obs_lt: int) -> bool:
        key = (y, tuple(sorted(prev)), obs_lt)
        if key in dead:
            return False
        h = n - 1 - y
        need_a = k.req_a(prev[0]) if prev else None
        twin, last = [], {}
        for x, m in enumerate(prev):
            twin.append(last.get(m, -1))
            last[m] = x
        for a in k.a_guesses(h):
            for u in k.units(obs_lt, a, h):
                k.tick()
                if y == 1 and not u >> xi_i & 1:
                    continue
                if need_a is not None and k.a_of_unit(u) != need_a:
                    continue
                labels[(y - 1, y)] = u
                if point(y, 0, prev, twin, a, h, obs_lt):
                    return True
        dead.add(key)
        return False

    def point(y, x, prev, twin, a, h, obs_lt) -> bool:
        if x == y - 1:
            if h == 0:
                return True
            obs_row = 0
            for m in prev:
                obs_row |= k.obs_li(m)
            cur = tuple(labels[(xx, y)] for xx in range(y))
            return row(y + 1, cur, obs_lt | obs_row)
        # columns with equal labels below are interchangeable from here up,
        # so their labels in this row are kept in non-decreasing order
        floor = labels[(twin[x], y)] if twin[x] >= 0 else -1
        for c in k.children(prev[x], a, h):
            if c < floor:
                continue
            k.tick()
            labels[(x, y)] = c
            if point(y, x + 1, prev, twin, a, h, obs_lt):
                return True
        return False

    if row(1, (), 0):
        return {p: labels[p] for p in intervals(n)}
    return None


# -- symbolic row search over finite orders ------------------------------------------

def _distributions(items: tuple[int, ...], child_fn) -> Iterator[tuple]:
    """Every way of giving each copy of a parent atom one child atom.

    ``items`` is a sorted tuple of atoms with repetition; each result pairs
    every distinct parent with the sorted tuple of its children.
    """
    per = []
    for parent, group in itertools.groupby(items):
        cands = child_fn(parent)
        if not cands:
            return
        count = sum(1 for _ in group)
        per.append([(parent, combo) for combo in itertools.combinations_with_replacement(cands, count)])
    yield from itertools.product(*per)


def _merge(unit: int, dist) -> tuple[int, ...]:
    out = [unit]
    for _, combo in dist:
        out.extend(combo)
    out.sort()
    return tuple(out)


def sat_finite_symbolic(f: Formula, max_rows: int, budget: int | None = None) -> SolverVerdict:
    """Search over row summaries (atom multisets) of finite models.

    Tries each row count up to ``max_rows`` in turn, so the returned model
    has the fewest rows possible.  Within a row count, states are explored
    breadth-first and deduplicated.
    """
    if max_rows < 1:
        raise ValueError("max_rows must be at least 1")
    start = time.perf_counter()
    f = normalize(f)
    xi = xi_finite(f)
    table = closure(xi, "reduced")
    k = _Kernel(table, budget)
    xi_i = table.index[xi]
    states = 0
    for rows in range(1, max_rows + 1):
        if not k.hb.observable(xi_i, rows - 1):
            continue
        found = _symbolic_rows(k, rows, xi_i)
        states += found[1]
        if found[0] is not None:
            model = _verify_finite(xi, found[0], rows + 1, table)
            return SolverVerdict(SAT, model, {"n": rows + 1, "rows": rows, "states": states,
                                              "seconds": time.perf_counter() - start})
    return SolverVerdict(UNSAT_AT_BOUND, None, {"n": max_rows + 1, "rows": max_rows,
                                                "states": states,
                                                "seconds": time.perf_counter() - start})


def _symbolic_rows(k: _Kernel, rows: int, xi_i: int) -> tuple[dict | None, int]:
    """Row summaries of models with exactly ``rows`` rows, depth-first, with
    summaries already known to be dead ends remembered."""
    parents: dict = {}
    dead: set = set()

    def extend(state, y: int):
        if y > rows:
            return state
        if state in dead:
            return None
        h = rows - y
        items, obs_lt = state
        need_a = k.req_a(items[0])
        obs_row = 0
        for m in set(items):
            obs_row |= k.obs_li(m)
        for a in k.a_guesses(h):
            for u in k.units(obs_lt, a, h):
                if k.a_of_unit(u) != need_a:
                    continue
                for dist in _distributions(items, lambda p: k.children(p, a, h)):
                    k.tick()
                    new = (_merge(u, dist), obs_lt | obs_row)
                    if new in dead or new in parents:
                        continue
                    parents[new] = (state, u, dist)
                    end = extend(new, y + 1)
                    if end is not None:
                        return end
                    del parents[new]
        dead.add(state)
        return None

    h = rows - 1
    for a in k.a_guesses(h):
        for u in k.units(0, a, h):
            k.tick()
            state = ((u,), 0)
            if not u >> xi_i & 1 or state in dead:
                continue
            parents[state] = None
            end = extend(state, 2)
            if end is not None:
                return _rebuild(end, parents), len(dead) + len(parents)
            del parents[state]
    return None, len(dead)


def _rebuild(end, parents) -> dict:
    """Explicit labels from a chain of row summaries: every point inherits the
    column of the parent occurrence it was assigned to."""
    chain = []
    s = end
    while parents[s] is not None:
        prev, u, dist = parents[s]
        chain.append((u, dist))
        s = prev
    first = s[0][0]
    chain.reverse()
    labels = {(0, 1): _item_atom(first)}
    row_items = [first]
    for y, (u, dist) in enumerate(chain, start=2):
        pool = {parent: list(combo) for parent, combo in dist}
        new_items = []
        for x, parent in enumerate(row_items):
            child = pool[parent].pop(0)
            labels[(x, y)] = _item_atom(child)
            new_items.append(child)
        labels[(y - 1, y)] = _item_atom(u)
        new_items.append(u)
        row_items = new_items
    return labels


def _item_atom(item) -> int:
    return item[0] if isinstance(item, tuple) else item


# -- the integers --------------------------------------------------------------------
#
# A row item is (atom, tag, pending): ``tag`` says where the item's column
# starts relative to y0 (0: left of y0 - 1, 1: the corner column y0 - 1,
# 2: right of it) and ``pending`` holds the B̄-requests a future-witness column
# still has to observe.  The context records the phase (how many of y0, y1,
# y2 are placed) and what the placed rows promised:
#
#   (phase, r0, corner, sh0, u0, out, inside, right, sh2, u2, phi_seen)
#
# ``r0`` is the Li-request set of the bottom-left corner; ``corner`` that of
# the corner of the expansion window; ``out``/``inside`` are observations (on
# Li-requested formulas) outside/inside the window in rows y0-1.. and
# ``right`` those of columns right of y0 - 1, all accumulated up to two rows
# below the row being created.

_PRE, _PAST, _MID, _FUT = range(4)


def _slot_choice(items: tuple, k: _Kernel) -> dict:
    """At y2: one occurrence of every atom becomes a future-witness column."""
    chosen = {}
    for it in items:
        m = it[0]
        if m not in {c[0] for c in chosen} and it not in chosen:
            req = k.t.profile(m)[3] & k.dBi
            if req:
                chosen[it] = (m, it[1], req)
            else:
                chosen[it] = it
    return {a: b for a, b in chosen.items() if a != b}


def _apply_slots(row: list, choice: dict) -> list:
    row = list(row)
    for old, new in choice.items():
        row[row.index(old)] = new
    return row


def sat_integers(f: Formula, max_rows: int, budget: int | None = None) -> SolverVerdict:
    """Search for a compass generator with at most ``max_rows`` rows.

    Generators are built bottom-up like finite models, except that requests
    may stay open at the top (they are fulfilled by rows added when the
    generator is unfolded) and the corner may carry Li-requests from the
    left.  Rows y0 < y1 < y2 are chosen along the way; the past band y0..y1
    and the future band y2..top must close up, and the unfolding window must
    be partially fulfilling.  A SAT verdict carries a generator that passed
    :func:`check_generator`, :func:`check_expandable` and a two-round
    unfolding.
    """
    if max_rows < 2:
        raise ValueError("max_rows must be at least 2")
    start = time.perf_counter()
    f = normalize(f)
    xi = xi_integers(f)
    table = closure(xi, "reduced")
    k = _Kernel(table, budget)
    hits = 0
    for g in (f, Diamond(Rel.BI, f)):
        hits |= 1 << table.index[g]
    found, explored = _integer_rows(k, max_rows, hits)
    if found is not None:
        gen = _verify_generator(f, found, table, hits)
        return SolverVerdict(SAT, gen, {"n": gen.n, "rows": gen.n - 1, "states": explored,
                                        "y0": gen.y0, "y1": gen.y1, "y2": gen.y2,
                                        "seconds": time.perf_counter() - start})
    return SolverVerdict(UNSAT_AT_BOUND, None, {"n": max_rows + 1, "rows": max_rows,
                                                "states": explored,
                                                "seconds": time.perf_counter() - start})


def _first(preferred, options) -> list:
    """``options`` with ``preferred`` moved to the front (search order only)."""
    options = list(options)
    if preferred in options:
        options.remove(preferred)
        options.insert(0, preferred)
    return options


def _integer_rows(k: _Kernel, max_rows: int, hits: int):
    """Depth-first search for a generator with at most ``max_rows`` rows.

    Choices that continue the row below unchanged (same A-requests, same
    unit, every column keeping its atom) are tried first, and rows are
    marked as early as possible; this only affects which generator is found.
    """
    t = k.t
    dLi = k.dLi
    parents: dict = {}
    dead: set = set()

    def obs_of(items, tags=(0, 1, 2)) -> int:
        out = 0
        for m, tag, _ in items:
            if tag in tags:
                out |= t.profile(m)[0]
        return out & dLi

    def advance(y, prev, ctx, obs_lt, u, li_u, new_items, mark):
        """The context after creating row ``y``; None when a condition fails."""
        phase, r0, corner, sh0, u0, out, inside, right, sh2, u2, phi = ctx
        if phase >= _PAST and out & ~(corner | inside):
            return None
        masks = frozenset(it[0] for it in new_items)
        if not li_closed(li_u):
            return None
        if phase == _PRE and li_u & ~observable_given(li_u, exact=False):
            # the corner will request at least this much
            return None
        if mark:
            if phase == _PRE:
                # columns y0..y1-2 all carry the corner's Li-requests, and
                # they must observe every one of those requests
                if li_u & ~observable_given(li_u):
                    return None
                phase, corner, sh0, u0 = _PAST, li_u, masks, u
                out = inside = right = 0
            elif phase == _PAST:
                if not masks <= sh0 or u != u0 or li_u & ~right:
                    return None
                phase = _MID
            elif phase == _MID:
                phase, sh2, u2 = _FUT, masks, u
        elif phase == _PAST:
            # the unit of y1 repeats the unit of y0, so nothing new may be
            # Li-observed in between, and every column must still be able to
            # reach an atom of row y0
            if li_u != corner or not all(reachable(m, sh0) for m in masks):
                return None
        elif phase == _FUT:
            if li_u != t.profile(u2)[4] or not all(reachable(m, sh2) for m in masks):
                return None
        if phase >= _PAST:
            out |= obs_of(prev, (0,))
            inside |= obs_of(prev, (1, 2))
            right |= obs_of(prev, (2,))
            phi = phi or bool(u & hits)
        return (phase, r0, corner, sh0, u0, out, inside, right, sh2, u2, phi)

    reach_memo: dict = {}
    given_memo: dict = {}

    closed_memo: dict = {}
    li_formulas = [(j, t.formulas[j]) for j in iter_bits(dLi)]
    li_leaves: set = set()
    for _, g in li_formulas:
        _leaves(g, li_leaves)
    li_leaves = sorted(li_leaves, key=pretty)

    def li_closed(li: int) -> bool:
        """Li-requests are everything observed earlier, so each requested
        entry must be observed by an atom whose Li-observations and
        Li-requests both stay inside ``li``."""
        ok = closed_memo.get(li)
        if ok is None:
            ok = True
            if len(li_leaves) <= k.hb.max_leaves:
                choices = []
                for leaf in li_leaves:
                    if isinstance(leaf, Prop):
                        choices.append((False,) if leaf.name == TOP_VAR else (False, True))
                    else:
                        j = t.index[leaf.child]
                        if leaf.rel is Rel.LI:
                            choices.append((False, True) if li >> j & 1 else (False,))
                        else:
                            choices.append((False, True) if k.hb.live >> j & 1 else (False,))
                covered = 0
                for vals in itertools.product(*choices):
                    val = dict(zip(li_leaves, vals))
                    seen = sum(1 << j for j, g in li_formulas if _eval(g, val))
                    if seen & ~li == 0:
                        covered |= seen
                ok = li & ~covered == 0
            closed_memo[li] = ok
        return ok

    def observable_given(li: int, exact: bool = True) -> int:
        """Entries observable by an atom whose Li-requests are exactly ``li``
        (or, with ``exact`` false, include ``li``)."""
        out = given_memo.get((li, exact))
        if out is None:
            live = k.hb.live

            def choice(r, j):
                if r is Rel.LI and (exact or li >> j & 1):
                    return (bool(li >> j & 1),)
                return (False, True) if live >> j & 1 else (False,)

            out = given_memo[(li, exact)] = _reachable_values(t, choice, k.hb.max_leaves)
        return out


    def reachable(m: int, targets: frozenset) -> bool:
        """Can a column labelled ``m`` carry an atom of ``targets`` further up?
        B-requests only grow and B̄-requests only shrink along a column."""
        key = (m, targets)
        ok = reach_memo.get(key)
        if ok is None:
            obs, _, rb, rbi, rli = t.profile(m)
            need = (obs | rb) & k.dB
            ok = any(
                (g := t.profile(F))[4] == rli and need & ~g[2] == 0 and g[3] & ~rbi == 0
                for F in targets
            )
            reach_memo[key] = ok
        return ok

    finish_memo: dict = {}
    any_a = k.a_guesses(None)

    def can_finish(item, left: int, targets: frozenset) -> bool:
        """Can this column be on an atom of ``targets`` (any atom if None),
        with its pending requests observed, within ``left`` more rows?  Inside a band the
        columns evolve independently, so this is a sound per-column filter."""
        m, _, pending = item
        if (targets is None or m in targets) and not pending:
            return True
        if left <= 0:
            return False
        key = (m, pending, left, targets)
        ok = finish_memo.get(key)
        if ok is None:
            ok = any(
                can_finish((c, 0, pending & ~t.profile(c)[0]), left - 1, targets)
                for a in any_a for c in k.children(m, a, None)
            )
            finish_memo[key] = ok
        return ok

    def can_return(item, left: int, targets: frozenset) -> bool:
        """``can_finish`` taking at least one step."""
        m, _, pending = item
        return left >= 1 and any(
            can_finish((c, 0, pending & ~t.profile(c)[0]), left - 1, targets)
            for a in any_a for c in k.children(m, a, None)
        )

    def accept(items, ctx, u) -> bool:
        phase, *_, sh2, u2, phi = ctx
        return (phase == _FUT and phi and u == u2 and all(p == 0 for _, _, p in items)
                and frozenset(it[0] for it in items) <= sh2)

    def unit_tag(ctx, mark) -> int:
        if ctx[0] == _PRE:
            return 1 if mark else 0
        return 2

    def marks(y, phase):
        # one mark per row, y0 >= 2 (row 1 holds only a unit, later rows
        # never do), and y2 must stay below the top row
        left = max_rows - 1 - y
        opts = [False]
        if phase < _FUT and (phase > _PRE or y >= 2):
            opts.insert(0, True)
        return [m for m in opts if 3 - phase - m <= max(left, 0)]

    def step(state, y):
        """Extend ``state`` (rows up to y - 1) by row ``y``."""
        if (y, state) in dead:
            return None
        prev, obs_lt, ctx = state
        r0 = ctx[1]
        need_a = k.req_a(prev[0][0])
        prev_unit = next(it[0] for it in prev if t.profile(it[0])[2] == 0)
        li_u = (r0 | obs_lt) & dLi
        new_lt = obs_lt | obs_of(prev)
        # every column alive now must be on an atom of row y0 at row y1
        # (at most max_rows - 2) and on an atom of row y2 at the top
        if ctx[0] == _PAST:
            left, target = max_rows - 2 - y, ctx[3]
        elif ctx[0] == _FUT:
            left, target = max_rows - y, ctx[8]
        else:
            left, target = max_rows - y, None
        if target is not None:
            children = lambda it, a: [c for c in _child_items(k, it, a) if can_finish(c, left, target)]
        else:
            children = lambda it, a: _child_items(k, it, a)
        y2_children = None
        if ctx[0] == _MID:
            # a row that becomes y2 turns one column per atom into a future
            # witness, which must observe the atom's B̄-requests before the top
            slot_ok = lambda c: can_finish((c[0], 0, t.profile(c[0])[3] & k.dBi), max_rows - y, None)
            y2_children = lambda it, a: [c for c in _child_items(k, it, a) if slot_ok(c)]
        for a in _first(need_a, k.a_guesses(None)):
            for u in _first(prev_unit, k.units(li_u, a, None)):
                if k.a_of_unit(u) != need_a:
                    continue
                for mark in marks(y, ctx[0]):
                    u_item = (u, unit_tag(ctx, mark), 0)
                    if target is not None and not can_finish(u_item, left, target):
                        continue
                    fn = y2_children if mark and ctx[0] == _MID else children
                    if fn is y2_children and not slot_ok(u_item):
                        continue
                    for dist in _distributions(prev, lambda it: fn(it, a)):
                        k.tick()
                        items = _merge(u_item, dist)
                        nctx = advance(y, prev, ctx, obs_lt, u, li_u, items, mark)
                        if nctx is None:
                            continue
                        if mark and ctx[0] == _PRE and not all(
                                can_return(it, max_rows - 2 - y, nctx[3]) for it in items):
                            continue
                        choice = {}
                        if mark and ctx[0] == _MID:
                            choice = _slot_choice(items, k)
                            items = tuple(sorted(_apply_slots(items, choice)))
                            if not all(can_finish(it, max_rows - y, nctx[8]) for it in items):
                                continue
                        new = (items, new_lt, nctx)
                        if new in parents:
                            continue
                        parents[new] = (state, u_item, dist, mark, choice)
                        if accept(items, nctx, u):
                            return new
                        if y < max_rows:
                            end = step(new, y + 1)
                            if end is not None:
                                return end
                        del parents[new]
        dead.add((y, state))
        return None

    for r0 in reversed(k._within(Rel.LI, None)):
        for a in k.a_guesses(None):
            for u in k.units(r0, a, None):
                for mark in marks(1, _PRE):
                    k.tick()
                    ctx = (_PRE, r0, 0, frozenset(), 0, 0, 0, 0, frozenset(), 0, False)
                    ctx = advance(1, (), ctx, 0, u, r0, ((u, 0, 0),), mark)
                    if ctx is None:
                        continue
                    state = (((u, 1 if mark else 0, 0),), 0, ctx)
                    if state in parents:
                        continue
                    parents[state] = None
                    end = step(state, 2)
                    if end is not None:
                        return (end, parents), len(parents) + len(dead)
                    del parents[state]
    return None, len(dead)


def _rebuild_generator(end, parents) -> tuple[dict, list[int], list[int]]:
    """Labels, marked rows (y0, y1, y2) and unit atoms from a search trace."""
    chain = []
    s = end
    while parents[s] is not None:
        chain.append(parents[s])
        s = parents[s][0]
    chain.reverse()
    first = s[0][0]
    labels = {(0, 1): first[0]}
    units = [None, first[0]]
    marked = [1] if first[1] == 1 else []
    row = [first]
    for y, (_, u_item, dist, mark, choice) in enumerate(chain, start=2):
        pool = {parent: list(combo) for parent, combo in dist}
        new = [pool[parent].pop(0) for parent in row] + [u_item]
        new = _apply_slots(new, choice)
        for x, it in enumerate(new):
            labels[(x, y)] = it[0]
        units.append(u_item[0])
        if mark:
            marked.append(y)
        row = new
    return labels, marked, units


def _verify_generator(f: Formula, found, table: ClosureTable, hits: int) -> CompassGenerator:
    end, parents = found
    labels, (y0, y1, y2), units = _rebuild_generator(end, parents)
    rows = len(units) - 1
    G = CompassStructure(rows + 1, labels, table)
    y_phi = next(y for y in range(y0, rows + 1) if units[y] & hits)
    past = past_witness_set(G, y1, min_x=y0)
    fut = future_witness_set(G, y2)
    gen = CompassGenerator(G, f, y_phi, y0, y1, y2,
                           {} if past is None else past.witness, fut or {})
    problems = check_generator(gen) + check_expandable(gen)
    if not problems:
        W = expand_generator(gen, 2)
        problems = [f"unfolded: {v}" for v in check_consistency(W) + check_partially_fulfilling(W)]
    if problems:
        raise VerificationError("generator failed re-verification: " + "; ".join(problems[:5]))
    return gen


def _child_items(k: _Kernel, item, a: int) -> list:
    m, tag, pending = item
    out = []
    for c in _first(m, k.children(m, a, None)):
        rest = pending & ~k.t.profile(c)[0] if pending else 0
        out.append((c, tag, rest))
    return out


# -- theoretical bounds -------------------------------------------------------------

#: Bounds with more decimal digits than this are reported by digit count only.
DIGIT_LIMIT = 10**6
#: Exact values longer than this are left out of JSON output.
JSON_DIGITS = 4000


@dataclass(frozen=True)
class BigBound:
    """``base ** (2 ** tower) * 2 ** linear``, exact when small enough."""

    base: int
    tower: int
    linear: int
    digits: int
    value: int | None

    def to_json(self) -> dict:
        out = {"base": self.base, "tower": self.tower, "linear": self.linear,
               "digits": self.digits}
        if self.value is not None and self.digits <= JSON_DIGITS:
            out["value"] = str(self.value)
        return out


def _big_bound(base: int, tower: int, linear: int) -> BigBound:
    exponent = 1 << tower
    # log10 of the bound, with enough precision for an exact integer part
    ctx = Context(prec=len(str(exponent)) + 40)
    log10 = ctx.add(ctx.multiply(Decimal(exponent), ctx.log10(Decimal(base))),
                    ctx.multiply(Decimal(linear), ctx.log10(Decimal(2))))
    digits = int(log10.to_integral_value(rounding="ROUND_FLOOR")) + 1
    value = None
    if digits <= DIGIT_LIMIT:
        value = base ** exponent << linear
    return BigBound(base, tower, linear, digits, value)


@dataclass(frozen=True)
class BoundReport:
    """Small-model bounds for a formula of the given size, next to the
    count cap the symbolic searches actually use."""

    size: int
    finite: BigBound
    integers: BigBound
    count_cap: int

    def to_json(self) -> dict:
        return {"size": self.size, "finite": self.finite.to_json(),
                "integers": self.integers.to_json(), "count_cap": self.count_cap}


def theoretical_bounds(f: Formula | int) -> BoundReport:
    """Row-count bounds for finite models and for integer generators.

    ``f`` may be a formula or its size directly.  The finite bound is
    ``(8s+15)^(2^(32s+56)) * 2^(32s+56)``, the integer bound
    ``(2s+1)^(2^(8s)) * 2^(16s^2+8s)``; neither is used as a search cap.
    """
    s = f if isinstance(f, int) else size(normalize(f))
    if s < 1:
        raise ValueError("formula size must be positive")
    return BoundReport(
        size=s,
        finite=_big_bound(8 * s + 15, 32 * s + 56, 32 * s + 56),
        integers=_big_bound(2 * s + 1, 8 * s, 16 * s * s + 8 * s),
        count_cap=8 * s + 14,
    )
