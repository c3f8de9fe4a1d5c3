"""Row-level analysis of compass structures.

Shadings and characteristic functions summarise a row; witness sets record
what a contraction must not lose; compatible rows can be glued together to
shrink a structure.  Compass generators are finite structures with four
marked rows from which a model over the integers is unfolded by
:func:`expand_generator`.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from abbl.formula import ClosureTable, Diamond, Formula, Rel, closure, iter_bits, parse, pretty
from abbl.structures import (
    CompassStructure, InvalidStructure, Point, Violation, _obs_indexes, _violation_key,
    check_consistency, check_fulfillment, intervals,
)


def _check_row(G: CompassStructure, y: int) -> None:
    if not 1 <= y <= G.n - 1:
        raise IndexError(f"row {y} is outside 1..{G.n - 1}")


def shading(G: CompassStructure, y: int) -> frozenset[int]:
    """The set of atoms labelling row ``y``."""
    _check_row(G, y)
    return frozenset(G.labels[(x, y)] for x in range(y))


def characteristic(G: CompassStructure, y: int, cap: int) -> dict[int, int]:
    """Per-atom occurrence counts on row ``y``, saturated at ``cap``."""
    _check_row(G, y)
    counts = Counter(G.labels[(x, y)] for x in range(y))
    return {f: min(c, cap) for f, c in counts.items()}


def unit(G: CompassStructure, y: int) -> int:
    """Label of the unit point ``(y-1, y)`` of row ``y``."""
    return G.labels[(y - 1, y)]


def project(points: Iterable[Point], bound: int) -> set[int]:
    """Column coordinates of ``points`` that lie left of ``bound``."""
    return {x for x, _ in points if x < bound}


# -- witness sets ------------------------------------------------------------------

@dataclass(frozen=True)
class WitnessSet:
    """Witness points for a row, and which closure formula each one covers."""

    row: int
    witness: dict[int, Point]  # closure index -> point

    @property
    def points(self) -> frozenset[Point]:
        return frozenset(self.witness.values())

    def __len__(self) -> int:
        return len(self.points)


def _prune(assign: dict[int, list[Point]], order: list[Point]) -> dict[int, Point]:
    """An inclusion-minimal choice of points covering every key.

    ``assign[k]`` lists admissible points for ``k`` best first; ``order`` is
    the removal order tried (worst first).
    """
    chosen = {pts[0] for pts in assign.values()}
    for p in order:
        if p not in chosen:
            continue
        rest = chosen - {p}
        if all(any(q in rest for q in pts) for pts in assign.values()):
            chosen = rest
    return {k: next(q for q in pts if q in chosen) for k, pts in assign.items()}


def witness_set(G: CompassStructure, y: int) -> WitnessSet:
    """Earliest occurrences above row ``y`` of every closure formula seen there.

    Ties are broken by smallest row, then smallest column.
    """
    _check_row(G, y)
    first_row: dict[int, int] = {}
    cands: dict[int, list[Point]] = defaultdict(list)
    for yy in range(y + 1, G.n):
        for x in range(yy):
            for a in iter_bits(G.obs((x, yy))):
                row = first_row.setdefault(a, yy)
                if row == yy:
                    cands[a].append((x, yy))
    order = sorted({p for pts in cands.values() for p in pts}, key=lambda p: (p[1], p[0]), reverse=True)
    wit = WitnessSet(y, _prune(dict(cands), order))
    assert len(wit) <= G.table.n_cl
    return wit


def future_witness_set(G: CompassStructure, y: int) -> dict[int, int] | None:
    """For every atom of row ``y``, a column carrying it whose B̄-requests are
    all observed further up that column; ``None`` when some atom has none."""
    _check_row(G, y)
    above, _, _, _ = _obs_indexes(G)
    out: dict[int, int] = {}
    for x in range(y):
        f = G.labels[(x, y)]
        if f in out:
            continue
        req = G.table.profile(f)[3]
        if req & ~above[(x, y)] == 0:
            out[f] = x
    if set(out) != set(shading(G, y)):
        return None
    return out


def past_witness_set(G: CompassStructure, y: int, min_x: int = 0) -> WitnessSet | None:
    """Points below row ``y - 1`` observing every Li-request of the unit of row
    ``y``, using only columns ``>= min_x``; ``None`` when impossible."""
    _check_row(G, y)
    req = G.table.profile(unit(G, y))[4]
    cands: dict[int, list[Point]] = {}
    for a in iter_bits(req):
        pts = [(x, yy) for yy in range(1, y - 1) for x in range(max(min_x, 0), yy)
               if G.obs((x, yy)) >> a & 1]
        if not pts:
            return None
        cands[a] = pts
    order = sorted({p for pts in cands.values() for p in pts}, key=lambda p: (p[1], p[0]), reverse=True)
    return WitnessSet(y, _prune(cands, order))


# -- compatibility and contraction ----------------------------------------------

@dataclass(frozen=True)
class Compatibility:
    """Evidence that two rows can be glued: a witness set and the map ``w``."""

    y0: int
    y1: int
    wit: WitnessSet
    w: dict[int, int]


def _match(G: CompassStructure, xs: Iterable[int], src: int, dst: int,
           fixed: dict[int, int] | None = None) -> dict[int, int] | None:
    """Injective ``w`` from columns ``xs`` (row ``src``) to columns of row ``dst``
    preserving labels.  Edges exist exactly between equal labels, so matching
    reduces to counting inside each label class."""
    fixed = dict(fixed or {})
    w: dict[int, int] = {}
    used = set()
    for x, target in fixed.items():
        if target >= dst or target in used or G.labels[(x, src)] != G.labels[(target, dst)]:
            return None
        w[x] = target
        used.add(target)
    free_by_label: dict[int, list[int]] = defaultdict(list)
    for x in range(dst):
        if x not in used:
            free_by_label[G.labels[(x, dst)]].append(x)
    for x in sorted(set(xs) - set(w)):
        pool = free_by_label.get(G.labels[(x, src)])
        if not pool:
            return None
        w[x] = pool.pop(0)
    return w


def rows_compatible(G: CompassStructure, y0: int, y1: int) -> Compatibility | None:
    """Equal shadings, equal unit atoms and a witness-preserving injection."""
    if not 1 <= y0 < y1 <= G.n - 1:
        raise ValueError(f"need 1 <= y0 < y1 <= {G.n - 1}, got {y0}, {y1}")
    if shading(G, y0) != shading(G, y1) or unit(G, y0) != unit(G, y1):
        return None
    wit = witness_set(G, y1)
    w = _match(G, project(wit.points, y1), y1, y0)
    if w is None:
        return None
    return Compatibility(y0, y1, wit, w)


def _column_map(G: CompassStructure, y0: int, y1: int, w: dict[int, int]) -> list[int]:
    """``f`` on columns ``0..y0-1``: label-preserving from row ``y0`` to row ``y1``
    and inverting ``w``; remaining columns take the smallest matching column."""
    f: list[int | None] = [None] * y0
    for x, target in w.items():
        f[target] = x
    first: dict[int, int] = {}
    for x in range(y1 - 1, -1, -1):
        first[G.labels[(x, y1)]] = x
    for x in range(y0):
        if f[x] is None:
            f[x] = first[G.labels[(x, y0)]]
        assert G.labels[(x, y0)] == G.labels[(f[x], y1)]
    return f  # type: ignore[return-value]


def _contract(G: CompassStructure, y0: int, y1: int, f: list[int]) -> CompassStructure:
    k = y1 - y0
    n = G.n - k
    labels = {}
    for x, y in intervals(n):
        if y < y0:
            src = (x, y)
        elif x < y0:
            src = (f[x], y + k)
        else:
            src = (x + k, y + k)
        labels[(x, y)] = G.labels[src]
    return CompassStructure(n, labels, G.table, G.origin)


def contract(G: CompassStructure, y0: int, y1: int, verify: bool = True) -> CompassStructure:
    """Remove rows ``y0..y1-1`` (and the matching columns), keeping ``(0, 1)``.

    With ``verify`` the input must be consistent and fulfilling.
    """
    comp = rows_compatible(G, y0, y1)
    if comp is None:
        raise ValueError(f"rows {y0} and {y1} are not compatible")
    if verify:
        bad = check_consistency(G) + check_fulfillment(G)
        if bad:
            raise InvalidStructure("contraction needs a consistent, fulfilling input", bad)
    return _contract(G, y0, y1, _column_map(G, y0, y1, comp.w))


def contract_fully(G: CompassStructure) -> tuple[CompassStructure, list[tuple[int, int]]]:
    """Contract repeatedly (lowest compatible pair first) until no two rows
    are compatible.  Returns the result and the pairs removed."""
    steps = []
    while True:
        pair = next(
            ((a, b) for b in range(2, G.n) for a in range(1, b) if rows_compatible(G, a, b)),
            None,
        )
        if pair is None:
            return G, steps
        G = contract(G, *pair, verify=False)
        steps.append(pair)


# -- partial fulfillment ------------------------------------------------------------

def check_partially_fulfilling(G: CompassStructure) -> list[Violation]:
    """Requests below the top row that are neither fulfilled nor handed on to
    the border (top row for B̄ and A, initial point for Li)."""
    above, below, col_all, rows_below = _obs_indexes(G)
    t = G.table
    top = G.n - 1
    corner_li = t.profile(G.labels[(0, 1)])[4]
    out = []
    for p in G.points():
        x, y = p
        if y >= top:
            continue
        _, ra, rb, rbi, rli = t.profile(G.labels[p])
        pending = {
            "A": ra & ~col_all[y] & ~t.profile(G.labels[(y, top)])[3],
            "B": rb & ~below[p],
            "Bi": rbi & ~above[p] & ~t.profile(G.labels[(x, top)])[3],
            "Li": rli & ~rows_below[x] & ~corner_li,
        }
        for name, m in pending.items():
            for a in iter_bits(m):
                out.append(Violation(p, name, None, pretty(t.formulas[a])))
    return sorted(out, key=_violation_key)


# -- compass generators ---------------------------------------------------------------

@dataclass
class CompassGenerator:
    """A finite partially fulfilling structure with four marked rows.

    ``past_wit`` maps closure indices to points below row ``y1 - 1``;
    ``fut_wit`` maps each atom of row ``y2`` to a column.
    """

    structure: CompassStructure
    phi: Formula
    y_phi: int
    y0: int
    y1: int
    y2: int
    past_wit: dict[int, Point] = field(default_factory=dict)
    fut_wit: dict[int, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.structure.n

    @property
    def table(self) -> ClosureTable:
        return self.structure.table

    def to_json(self) -> dict:
        data = self.structure.to_json()
        t = self.table
        data.update(
            phi=pretty(self.phi), y_phi=self.y_phi, y0=self.y0, y1=self.y1, y2=self.y2,
            past_wit=[
                {"formula": pretty(t.formulas[a]), "point": list(p)}
                for a, p in sorted(self.past_wit.items())
            ],
            fut_wit=[{"atom": t.decode_str(f), "x": x} for f, x in sorted(self.fut_wit.items(), key=lambda i: i[1])],
        )
        return data

    @classmethod
    def from_json(cls, data: dict) -> "CompassGenerator":
        from abbl.atoms import atom_mask_from_strings

        G = CompassStructure.from_json(data)
        t = G.table
        past = {atom_mask_from_strings([d["formula"]], t).bit_length() - 1: tuple(d["point"])
                for d in data.get("past_wit", [])}
        fut = {atom_mask_from_strings(d["atom"], t): int(d["x"]) for d in data.get("fut_wit", [])}
        return cls(G, parse(data["phi"]), int(data["y_phi"]), int(data["y0"]), int(data["y1"]),
                   int(data["y2"]), past, fut)


def _valid_past(G: CompassStructure, y1: int, past: dict[int, Point]) -> list[str]:
    problems = []
    if not 1 <= y1 <= G.n - 1:
        return [f"row {y1} out of range"]
    req = G.table.profile(unit(G, y1))[4]
    for a in iter_bits(req):
        p = past.get(a)
        if p is None:
            problems.append(f"no past witness for {pretty(G.table.formulas[a])}")
        elif p not in G.labels or p[1] >= y1 - 1 or not G.obs(p) >> a & 1:
            problems.append(f"{p} does not witness {pretty(G.table.formulas[a])}")
    return problems


def _valid_future(G: CompassStructure, y2: int, fut: dict[int, int]) -> list[str]:
    if not 1 <= y2 <= G.n - 1:
        return [f"row {y2} out of range"]
    above, _, _, _ = _obs_indexes(G)
    problems = []
    for f in sorted(shading(G, y2)):
        x = fut.get(f)
        if x is None or not 0 <= x < y2 or G.labels[(x, y2)] != f:
            problems.append(f"no future witness column for an atom of row {y2}")
        elif G.table.profile(f)[3] & ~above[(x, y2)]:
            problems.append(f"column {x} leaves B̄-requests of row {y2} unobserved")
    return problems


def check_generator(gen: CompassGenerator) -> list[str]:
    """Every reason ``gen`` is not a compass generator (empty when it is)."""
    G, t = gen.structure, gen.table
    n = G.n
    out = [f"consistency: {v}" for v in check_consistency(G)]
    out += [f"partial fulfillment: {v}" for v in check_partially_fulfilling(G)]
    rows = (gen.y_phi, gen.y0, gen.y1, gen.y2)
    if not all(1 <= r <= n - 1 for r in rows):
        return out + [f"G1: marked rows {rows} outside 1..{n - 1}"]
    if not (gen.y0 < gen.y1 < gen.y2 and gen.y0 <= gen.y_phi):
        out.append(f"G1: need y0 < y1 < y2 and y0 <= y_phi, got {rows}")
    u = G.labels[(gen.y_phi - 1, gen.y_phi)]
    hits = [i for i in (t.index.get(gen.phi), t.index.get(Diamond(Rel.BI, gen.phi))) if i is not None]
    if not any(u >> i & 1 for i in hits):
        out.append(f"G2: neither phi nor <Bi> phi labels the unit of row {gen.y_phi}")
    if not shading(G, gen.y1) <= shading(G, gen.y0):
        out.append(f"G3: shading of row {gen.y1} not within shading of row {gen.y0}")
    if unit(G, gen.y0) != unit(G, gen.y1):
        out.append(f"G3: units of rows {gen.y0} and {gen.y1} differ")
    out += [f"G4: {m}" for m in _valid_past(G, gen.y1, gen.past_wit)]
    xs = project(gen.past_wit.values(), gen.y1)
    if xs and min(xs) < gen.y0:
        out.append(f"G4: past witness column {min(xs)} is left of y0={gen.y0}")
    if not shading(G, n - 1) <= shading(G, gen.y2):
        out.append(f"G5: shading of row {n - 1} not within shading of row {gen.y2}")
    if unit(G, gen.y2) != unit(G, n - 1):
        out.append(f"G5: units of rows {gen.y2} and {n - 1} differ")
    out += [f"G6: {m}" for m in _valid_future(G, gen.y2, gen.fut_wit)]
    return out


def initial_window(gen: CompassGenerator) -> CompassStructure:
    """The part of the generator kept by the first expansion round: columns
    from ``y0 - 1`` and rows from ``y0``, shifted to start at ``(0, 1)``."""
    G = gen.structure
    s = gen.y0 - 1
    labels = {(x - s, y - s): m for (x, y), m in G.labels.items() if x >= s}
    return CompassStructure(G.n - s, labels, G.table, G.origin + s)


def check_expandable(gen: CompassGenerator) -> list[str]:
    """Extra conditions the unfolding relies on beyond G1-G6: the initial
    window must itself be partially fulfilling, and rows above ``y2`` must
    exist so each round grows the structure upwards."""
    out = []
    if gen.y2 >= gen.n - 1:
        out.append(f"expansion: no rows above y2={gen.y2}")
    if 1 <= gen.y0 < gen.n:
        out += [f"expansion: initial window: {v}" for v in check_partially_fulfilling(initial_window(gen))]
    return out


# -- global compatibility and generator contraction --------------------------------

@dataclass(frozen=True)
class GlobalCompatibility:
    y: int
    y_prime: int
    wit: WitnessSet
    w: dict[int, int]


def rows_globally_compatible(gen: CompassGenerator, y: int, y_prime: int) -> GlobalCompatibility | None:
    """Compatible rows whose removal spares the marked rows and all witnesses."""
    G = gen.structure
    if not 1 <= y < y_prime <= G.n - 1:
        raise ValueError(f"need 1 <= y < y' <= {G.n - 1}, got {y}, {y_prime}")
    inside = lambda r: y <= r <= y_prime
    if unit(G, y) != unit(G, y_prime) or shading(G, y) != shading(G, y_prime):
        return None
    if any(inside(r) for r in (gen.y_phi, gen.y0, gen.y1, gen.y2)):
        return None
    if any(inside(p[1]) for p in gen.past_wit.values()):
        return None
    above_ok = True
    t = G.table
    for f, x in gen.fut_wit.items():
        for a in iter_bits(t.profile(f)[3]):
            if not any(G.obs((x, r)) >> a & 1 and not inside(r) for r in range(gen.y2 + 1, G.n)):
                above_ok = False
    if not above_ok:
        return None
    wit = witness_set(G, y_prime)
    past_x = project(gen.past_wit.values(), y_prime)
    xs = project(wit.points, y_prime) | past_x | {x for x in gen.fut_wit.values() if x < y_prime}
    w = _match(G, xs, y_prime, y, fixed={x: x for x in past_x})
    if w is None:
        return None
    return GlobalCompatibility(y, y_prime, wit, w)


def contract_generator(gen: CompassGenerator, y: int, y_prime: int) -> CompassGenerator:
    """Remove the band between two globally compatible rows.

    Marked rows above the band move down by ``y' - y``; the witness sets are
    recomputed on the contracted structure.
    """
    comp = rows_globally_compatible(gen, y, y_prime)
    if comp is None:
        raise ValueError(f"rows {y} and {y_prime} are not globally compatible")
    G = gen.structure
    k = y_prime - y
    H = _contract(G, y, y_prime, _column_map(G, y, y_prime, comp.w))
    move = lambda r: r if r < y else r - k
    y_phi, y0, y1, y2 = (move(r) for r in (gen.y_phi, gen.y0, gen.y1, gen.y2))
    past = past_witness_set(H, y1, min_x=y0)
    fut = future_witness_set(H, y2)
    if past is None or fut is None:
        raise AssertionError("contraction lost a witness of a globally compatible pair")
    return CompassGenerator(H, gen.phi, y_phi, y0, y1, y2, past.witness, fut)


# -- unfolding a generator ---------------------------------------------------------------

class ExpansionError(RuntimeError):
    """The unfolding broke its invariant (indicates an invalid generator)."""


@dataclass
class ExpansionRound:
    y_min: int
    y_max: int
    k_past: int
    k_future: int


def expand_generator(gen: CompassGenerator, k: int,
                     trace: list[ExpansionRound] | None = None) -> CompassStructure:
    """The finite window reached after ``k`` unfolding rounds.

    Rounds extend the window ``y1 - y0`` rows into the past (by translating its
    lowest band) and ``N - 1 - y2`` rows into the future (by copying columns of
    the generator).  Coordinates are those of the generator internally; the
    result is shifted so its corner is ``(0, 1)`` and ``origin`` holds the
    shift.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    bad = check_generator(gen) + check_expandable(gen)
    if bad:
        raise InvalidStructure("not an expandable compass generator", bad)
    G = gen.structure.labels
    n = gen.n
    y0, y1, y2 = gen.y0, gen.y1, gen.y2
    kp, kf = y1 - y0, n - 1 - y2
    sh0, sh2 = _shading_of(G, y0), _shading_of(G, y2)
    col0 = _first_column(G, y0)
    col1 = _first_column(G, y1)
    fut = gen.fut_wit

    L = {(x, y): m for (x, y), m in G.items() if x >= y0 - 1 and y >= y0}
    y_min, y_max = y0, n - 1
    _check_inv(L, y_min, y_max, kp, sh0, sh2, G, y0, y2)
    if trace is not None:
        trace.append(ExpansionRound(y_min, y_max, kp, kf))
    for _ in range(k):
        n_min, n_max = y_min - kp, y_max + kf
        M = dict(L)
        for y in range(n_min, y_min + 1):  # translate the lowest band down
            for x in range(n_min - 1, y):
                if (x, y) not in M:
                    M[(x, y)] = L[(x + kp, y + kp)]
        for y in range(y_max + 1, n_max + 1):  # translate the top corner up
            for x in range(y_max, y):
                M[(x, y)] = L[(x - kf, y - kf)]
        for x in range(n_min - 1, y_min - 1):  # new columns on the left
            y = y_min
            while y < y1:
                src = col0[M[(x, y)]]
                for j in range(1, kp + 1):
                    M[(x, y + j)] = G[(src, y0 + j)]
                y += kp
            src = col1[M[(x, y1)]]
            for yy in range(y1 + 1, y2 + 1):
                M[(x, yy)] = G[(src, yy)]
            y = y2
            while y < n_max:
                src = fut[M[(x, y)]]
                for j in range(1, kf + 1):
                    M[(x, y + j)] = G[(src, y2 + j)]
                y += kf
        for x in range(y_min - 1, y_max):  # old columns grow upwards
            src = fut[M[(x, y_max)]]
            for j in range(1, kf + 1):
                M[(x, y_max + j)] = G[(src, y2 + j)]
        expected = {(x, y) for y in range(n_min, n_max + 1) for x in range(n_min - 1, y)}
        if set(M) != expected:
            raise ExpansionError("expansion left points unlabelled")
        L, y_min, y_max = M, n_min, n_max
        _check_inv(L, y_min, y_max, kp, sh0, sh2, G, y0, y2)
        if trace is not None:
            trace.append(ExpansionRound(y_min, y_max, kp, kf))
    s = y_min - 1
    labels = {(x - s, y - s): m for (x, y), m in L.items()}
    return CompassStructure(y_max - s + 1, labels, gen.table, gen.structure.origin + s)


def _shading_of(labels: dict[Point, int], y: int) -> frozenset[int]:
    return frozenset(labels[(x, y)] for x in range(y))


def _first_column(labels: dict[Point, int], y: int) -> dict[int, int]:
    out: dict[int, int] = {}
    for x in range(y - 1, -1, -1):
        out[labels[(x, y)]] = x
    return out


def _check_inv(L, y_min, y_max, kp, sh0, sh2, G, y0, y2) -> None:
    top = frozenset(L[(x, y_max)] for x in range(y_min - 1, y_max))
    low = frozenset(L[(x, y_min + kp)] for x in range(y_min - 1, y_min + kp))
    if not top <= sh2 or not low <= sh0:
        raise ExpansionError("shading invariant violated")
    if L[(y_max - 1, y_max)] != G[(y2 - 1, y2)] or L[(y_min - 1, y_min)] != G[(y0 - 1, y0)]:
        raise ExpansionError("unit invariant violated")
