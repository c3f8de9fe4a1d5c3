"""Atoms over a closure table, their request profiles and dependency relations.

Atoms are plain integers (bitmasks over the table ordering) inside the search
kernels; :class:`Atom` wraps a mask with its table for the public API.  The
``dep_*`` functions take atoms, the ``*_m`` variants take a table and masks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

from abbl.formula import (
    RELATIONS, ClosureTable, Formula, Or, Prop, Rel, TOP_VAR, iter_bits, pretty, subsets,
)

#: Default refusal threshold for explicit atom enumeration, in table entries.
ENUMERATION_CAP = 30


class CapacityError(RuntimeError):
    """A request would exceed a configured resource cap."""


class TableMismatch(ValueError):
    """Two atoms from different closure tables were combined."""


@dataclass(frozen=True)
class Atom:
    """A maximal locally consistent subset of a closure table."""

    mask: int
    table: ClosureTable

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.table.width:
            raise ValueError("bitmask wider than the closure table")

    def __eq__(self, other) -> bool:
        return isinstance(other, Atom) and self.mask == other.mask and self.table is other.table

    def __hash__(self) -> int:
        return hash((self.mask, id(self.table)))

    def __contains__(self, f: Formula) -> bool:
        return bool(self.mask >> self.table.lookup(f) & 1)

    def formulas(self) -> list[Formula]:
        return self.table.decode(self.mask)

    def to_json(self) -> list[str]:
        return self.table.decode_str(self.mask)

    @classmethod
    def from_json(cls, items: list[str], table: ClosureTable) -> "Atom":
        return cls(atom_mask_from_strings(items, table), table)

    def __repr__(self) -> str:
        shown = [s for s in self.to_json() if not s.startswith("~")]
        return "Atom{" + ", ".join(shown) + "}"


@dataclass(frozen=True)
class RequestProfile:
    """Observables and per-relation requests of an atom, as formula sets."""

    obs: frozenset[Formula]
    req_a: frozenset[Formula]
    req_b: frozenset[Formula]
    req_bi: frozenset[Formula]
    req_li: frozenset[Formula]

    def req(self, rel: Rel) -> frozenset[Formula]:
        return {Rel.A: self.req_a, Rel.B: self.req_b, Rel.BI: self.req_bi, Rel.LI: self.req_li}[rel]


def _unwrap(F, G=None):
    if isinstance(F, Atom):
        if G is not None and isinstance(G, Atom) and G.table is not F.table:
            raise TableMismatch("atoms belong to different closure tables")
        return F.table, F.mask, (G.mask if isinstance(G, Atom) else G)
    raise TypeError("expected an Atom; use the *_m mask functions for raw masks")


def is_atom(mask: int, table: ClosureTable) -> bool:
    """Exactly one of each complementary pair, and disjunctions are respected."""
    if mask < 0 or mask >> table.width:
        raise ValueError("bitmask width does not match the closure table")
    for i in range(0, table.width, 2):
        if (mask >> i & 1) == (mask >> (i + 1) & 1):
            return False
    for i in range(0, table.n_cl, 2):
        g = table.formulas[i]
        if isinstance(g, Or):
            want = bool(mask >> table.index[g.left] & 1 or mask >> table.index[g.right] & 1)
            if want != bool(mask >> i & 1):
                return False
    return True


def profile(F: Atom) -> RequestProfile:
    table = F.table
    obs, ra, rb, rbi, rli = table.profile(F.mask)
    dec = lambda m: frozenset(table.decode(m))
    return RequestProfile(dec(obs), dec(ra), dec(rb), dec(rbi), dec(rli))


# -- dependency relations on raw masks --------------------------------------

def dep_a_m(table: ClosureTable, f: int, g: int) -> bool:
    _, fa, _, _, _ = table.profile(f)
    go, _, gb, gbi, _ = table.profile(g)
    dom = table.domain[Rel.A]
    return fa == (go | gb | gbi) & dom


def dep_b_m(table: ClosureTable, f: int, g: int) -> bool:
    fo, _, fb, fbi, fli = table.profile(f)
    go, _, gb, gbi, gli = table.profile(g)
    dom = table.domain[Rel.B]
    if fli != gli:
        return False
    lo = (fo | fbi) & dom
    if gbi & lo != lo or gbi & ~(fo | fbi | fb) & dom:
        return False
    lo = (go | gb) & dom
    if fb & lo != lo or fb & ~(go | gb | gbi) & dom:
        return False
    return True


def dep_li_m(table: ClosureTable, f: int, g: int) -> bool:
    _, _, _, _, fli = table.profile(f)
    go, _, _, _, gli = table.profile(g)
    need = (go | gli) & table.domain[Rel.LI]
    return fli & need == need


def dep_b_local_m(table: ClosureTable, f: int, g: int) -> bool:
    fo, _, fb, fbi, fli = table.profile(f)
    go, _, gb, gbi, gli = table.profile(g)
    dom = table.domain[Rel.B]
    return fli == gli and fb == (go | gb) & dom and gbi == (fo | fbi) & dom


DEP_M = {Rel.A: dep_a_m, Rel.B: dep_b_m, Rel.LI: dep_li_m}


# -- public wrappers ---------------------------------------------------------

def dep_A(F: Atom, G: Atom) -> bool:
    """``F ->A G``: the A-requests of F are exactly what G observes or requests."""
    table, f, g = _unwrap(F, G)
    return dep_a_m(table, f, g)


def dep_B(F: Atom, G: Atom) -> bool:
    """``F ->B G`` (G labels a prefix of F's interval)."""
    table, f, g = _unwrap(F, G)
    return dep_b_m(table, f, g)


def dep_Lbar(F: Atom, G: Atom) -> bool:
    """``F ->Li G`` (G labels an interval entirely before F's)."""
    table, f, g = _unwrap(F, G)
    return dep_li_m(table, f, g)


def dep_B_local(F: Atom, G: Atom) -> bool:
    """Strengthened ``->B`` for intervals that differ by one point."""
    table, f, g = _unwrap(F, G)
    ok = dep_b_local_m(table, f, g)
    assert not ok or dep_b_m(table, f, g), "B-local must imply B"
    return ok


DEP = {Rel.A: dep_A, Rel.B: dep_B, Rel.LI: dep_Lbar}


# -- enumeration --------------------------------------------------------------

def _free_parts(table: ClosureTable):
    props = sorted(
        g.name for g in table.cl if isinstance(g, Prop)
    )
    return props, [table.domain[r] for r in RELATIONS]


def count_atoms(table: ClosureTable) -> int:
    """Number of atoms, computed from the free choices (no enumeration)."""
    props, domains = _free_parts(table)
    return 2 ** (len(props) + sum(bin(d).count("1") for d in domains))


def iter_atom_masks(table: ClosureTable, fixed_false=(TOP_VAR,)) -> Iterator[int]:
    """Atoms built from every choice of true variables and request sets.

    Variables listed in ``fixed_false`` are held false (by default the reserved
    variable behind ``true``/``false``, which carries no meaning).
    """
    props, domains = _free_parts(table)
    free = [p for p in props if p not in fixed_false]
    for bits in itertools.product((False, True), repeat=len(free)):
        chosen = frozenset(p for p, b in zip(free, bits) if b)
        for ra in subsets(domains[0]):
            for rb in subsets(domains[1]):
                for rbi in subsets(domains[2]):
                    for rli in subsets(domains[3]):
                        yield table.complete(chosen, ra, rb, rbi, rli)


def enumerate_atoms(table: ClosureTable, cap: int = ENUMERATION_CAP) -> Iterator[Atom]:
    """Every atom of the table, in increasing bitmask order."""
    if table.width == 0:
        raise CapacityError("empty closure table")
    if table.width > cap:
        raise CapacityError(
            f"closure table has {table.width} entries, above the enumeration cap {cap}"
        )
    masks = sorted(iter_atom_masks(table, fixed_false=()))
    for m in masks:
        yield Atom(m, table)


# -- (de)serialisation ----------------------------------------------------------

def atom_mask_from_strings(items: list[str], table: ClosureTable) -> int:
    lookup = getattr(table, "_by_text", None)
    if lookup is None:
        lookup = {pretty(f): i for i, f in enumerate(table.formulas)}
        table._by_text = lookup
    mask = 0
    for s in items:
        try:
            mask |= 1 << lookup[s]
        except KeyError:
            raise ValueError(f"{s!r} is not in the closure table") from None
    return mask


def mask_to_cl_strings(table: ClosureTable, cl_mask: int) -> list[str]:
    return sorted(pretty(table.formulas[i]) for i in iter_bits(cl_mask))
