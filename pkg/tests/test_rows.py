import json

import pytest

from abbl import closure, parse
from abbl.formula import size
from abbl.rows import (
    CompassGenerator, characteristic, check_expandable, check_generator,
    check_partially_fulfilling, contract, contract_fully, contract_generator, expand_generator,
    future_witness_set, initial_window, past_witness_set, project, rows_compatible,
    rows_globally_compatible, shading, unit, witness_set,
)
from abbl.solver import sat_integers
from abbl.structures import (
    CompassStructure, IntervalStructure, InvalidStructure, check_consistency, check_fulfillment,
    compass_from_interval, features,
)
from corpus import PHI_PAST, periodic_corpus, periodic_structure, random_corpus


def _generator(text, rows=7):
    v = sat_integers(parse(text), rows)
    assert v.sat
    return v.model


def test_shading_and_unit():
    t = closure(parse("p"))
    G = compass_from_interval(IntervalStructure(4, {(0, 1): {"p"}, (1, 3): {"p"}}), t)
    assert shading(G, 3) == {G[(0, 3)], G[(1, 3)], G[(2, 3)]}
    assert unit(G, 3) == G[(2, 3)]
    with pytest.raises(IndexError):
        shading(G, 4)
    with pytest.raises(IndexError):
        shading(G, 0)


def test_characteristic_saturates():
    t = closure(parse("p"))
    G = compass_from_interval(IntervalStructure(6), t)
    full = characteristic(G, 5, 10)
    assert sum(full.values()) == 5 and set(full) == shading(G, 5)
    capped = characteristic(G, 5, 1)
    assert capped == {f: 1 for f in full}


def test_project():
    assert project({(0, 5), (3, 4), (6, 7)}, 5) == {0, 3}


def test_witness_set_covers_everything_observed_above():
    for f, S, G in random_corpus()[:40]:
        for y in range(1, G.n - 1):
            wit = witness_set(G, y)
            seen = 0
            for yy in range(y + 1, G.n):
                for x in range(yy):
                    seen |= G.obs((x, yy))
            covered = 0
            for a, p in wit.witness.items():
                assert p[1] > y and G.obs(p) >> a & 1
                covered |= 1 << a
            assert covered == seen
            assert len(wit) <= G.table.n_cl


def test_witness_set_prefers_lowest_rows():
    f, S, G = random_corpus()[4]
    wit = witness_set(G, 1)
    for a, p in wit.witness.items():
        first = min(yy for yy in range(2, G.n) for x in range(yy) if G.obs((x, yy)) >> a & 1)
        assert p[1] == first


def test_rows_compatible_requires_equal_shading_and_unit():
    G = compass_from_interval(periodic_structure("unit", 6), closure(parse("<A> p")))
    with pytest.raises(ValueError):
        rows_compatible(G, 3, 3)
    for y0 in range(1, G.n - 1):
        for y1 in range(y0 + 1, G.n):
            comp = rows_compatible(G, y0, y1)
            if comp is not None:
                assert shading(G, y0) == shading(G, y1) and unit(G, y0) == unit(G, y1)
                for x, target in comp.w.items():
                    assert G[(x, y1)] == G[(target, y0)]
                assert len(set(comp.w.values())) == len(comp.w)


def _compatible_pairs(G):
    return [(a, b) for b in range(2, G.n) for a in range(1, b) if rows_compatible(G, a, b)]


def test_contractions_verify():
    done = 0
    for f, rule, G in periodic_corpus():
        for y0, y1 in _compatible_pairs(G):
            H = contract(G, y0, y1)
            assert H.n == G.n - (y1 - y0)
            assert check_consistency(H) == [] and check_fulfillment(H) == []
            assert features(H, f) == features(G, f)
            done += 1
    assert done >= 20


def test_contract_keeps_the_corner():
    for f, rule, G in periodic_corpus()[:20]:
        for y0, y1 in _compatible_pairs(G)[:2]:
            assert contract(G, y0, y1)[(0, 1)] == G[(0, 1)]


def test_contract_rejects_incompatible_rows():
    G = compass_from_interval(IntervalStructure(4, {(0, 1): {"p"}}), closure(parse("p")))
    with pytest.raises(ValueError):
        contract(G, 1, 2)


def test_contract_rejects_invalid_input():
    f, rule, G = next(item for item in periodic_corpus()
                      if any(b < item[2].n - 1 for a, b in _compatible_pairs(item[2])))
    y0, y1 = next((a, b) for a, b in _compatible_pairs(G) if b < G.n - 1)
    labels = dict(G.labels)
    top = G.n - 1
    labels[(0, top)] = next(m for m in set(G.labels.values()) if m != G[(0, top)])
    H = CompassStructure(G.n, labels, G.table)
    assert rows_compatible(H, y0, y1) is not None
    assert check_consistency(H) or check_fulfillment(H)
    with pytest.raises(InvalidStructure):
        contract(H, y0, y1)


def test_capped_characteristic_implies_compatible():
    checked = 0
    for f, rule, G in periodic_corpus():
        cap = 2 * size(f)
        for y1 in range(2, G.n):
            for y0 in range(1, y1):
                if characteristic(G, y0, cap) == characteristic(G, y1, cap) and unit(G, y0) == unit(G, y1):
                    assert rows_compatible(G, y0, y1) is not None
                    checked += 1
    assert checked > 0


def test_contract_fully_leaves_no_compatible_rows():
    for f, rule, G in periodic_corpus()[::7]:
        H, steps = contract_fully(G)
        assert H.n == G.n - sum(b - a for a, b in steps)
        assert _compatible_pairs(H) == []
        assert check_consistency(H) == [] and check_fulfillment(H) == []
        assert features(H, f) == features(G, f)


def test_partial_fulfillment_of_truncations():
    for f, S, G in random_corpus()[:40]:
        assert check_partially_fulfilling(G) == []
        for n in range(2, G.n):
            assert check_partially_fulfilling(G.restrict(n)) == []


def test_partial_fulfillment_flags_inner_requests():
    # <B> p at (0, 2) needs p at (0, 1), which no border can supply
    t = closure(parse("<B> p"))
    G = compass_from_interval(IntervalStructure(4, {(0, 1): {"p"}}), t)
    labels = dict(G.labels)
    labels[(0, 1)] = compass_from_interval(IntervalStructure(4), t)[(0, 1)]
    bad = check_partially_fulfilling(CompassStructure(4, labels, t))
    assert ((0, 2), "B", "p") in [(v.point, v.relation, v.formula) for v in bad]
    # the same request on the top row is left to the border
    low = check_partially_fulfilling(CompassStructure(4, labels, t).restrict(3))
    assert all(v.point != (0, 2) for v in low)


@pytest.mark.parametrize("text", ["p", "<Li> p", PHI_PAST])
def test_integer_generators_are_valid(text):
    gen = _generator(text)
    assert check_generator(gen) == [] and check_expandable(gen) == []
    assert gen.y0 < gen.y1 < gen.y2 < gen.n - 1
    prev = None
    for k in range(3):
        trace = []
        W = expand_generator(gen, k, trace)
        assert len(trace) == k + 1
        assert check_consistency(W) == [] and check_partially_fulfilling(W) == []
        if prev is not None:
            # each round adds y1-y0 rows below and N-1-y2 rows above
            grow = (gen.y1 - gen.y0) + (gen.n - 1 - gen.y2)
            assert W.n == prev.n + grow
            assert W.origin == prev.origin - (gen.y1 - gen.y0)
            shift = prev.origin - W.origin
            for (x, y), m in prev.labels.items():
                assert W[(x + shift, y + shift)] == m
        prev = W


def test_expand_rejects_negative_rounds():
    with pytest.raises(ValueError):
        expand_generator(_generator("p"), -1)


def test_generator_condition_violations():
    gen = _generator(PHI_PAST)
    bad = CompassGenerator(gen.structure, gen.phi, gen.y_phi, gen.y1, gen.y0, gen.y2,
                           gen.past_wit, gen.fut_wit)
    assert any(m.startswith("G1") for m in check_generator(bad))
    assert gen.past_wit
    bad = CompassGenerator(gen.structure, gen.phi, gen.y_phi, gen.y0, gen.y1, gen.y2, {}, gen.fut_wit)
    assert any(m.startswith("G4") for m in check_generator(bad))
    bad = CompassGenerator(gen.structure, gen.phi, gen.y_phi, gen.y0, gen.y1, gen.y2, gen.past_wit, {})
    assert any(m.startswith("G6") for m in check_generator(bad))
    with pytest.raises(InvalidStructure):
        expand_generator(bad, 1)


def test_witness_sets_of_generators():
    gen = _generator(PHI_PAST)
    past = past_witness_set(gen.structure, gen.y1, min_x=gen.y0)
    assert past is not None and past.witness == gen.past_wit
    assert future_witness_set(gen.structure, gen.y2) == gen.fut_wit


def test_initial_window_is_partially_fulfilling():
    gen = _generator("<Li> p")
    W = initial_window(gen)
    assert W.n == gen.n - gen.y0 + 1 and check_partially_fulfilling(W) == []


def test_generator_json_round_trip():
    gen = _generator(PHI_PAST)
    back = CompassGenerator.from_json(json.loads(json.dumps(gen.to_json())))
    assert back.structure.labels == gen.structure.labels
    assert (back.y_phi, back.y0, back.y1, back.y2) == (gen.y_phi, gen.y0, gen.y1, gen.y2)
    assert back.past_wit == gen.past_wit and back.fut_wit == gen.fut_wit
    assert check_generator(back) == []


def test_global_compatibility_spares_marked_rows():
    for text in ("p", "<Li> p", PHI_PAST):
        gen = _generator(text)
        for yp in range(2, gen.n):
            for y in range(1, yp):
                comp = rows_globally_compatible(gen, y, yp)
                if comp is None:
                    continue
                assert not any(y <= r <= yp for r in (gen.y_phi, gen.y0, gen.y1, gen.y2))
                H = contract_generator(gen, y, yp)
                assert H.n == gen.n - (yp - y)
                assert check_generator(H) == []
