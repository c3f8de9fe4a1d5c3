import numpy as np
import pytest

from abbl import BOT, TOP, Diamond, FormulaSyntaxError, Not, Or, Prop, Rel, closure, normalize, parse, pretty
from abbl.formula import TOP_VAR, box, conj, implies, modal_depth, size, subformulas, variables
from abbl.harness import FuzzConfig, corpus

p, q = Prop("p"), Prop("q")


def test_parse_variable():
    assert parse("p") == p


def test_parse_desugars_box():
    assert parse("<A> p | [B] q") == Or(Diamond(Rel.A, p), Not(Diamond(Rel.B, Not(q))))
    # the inner double negation of [B] ~q cancels
    assert parse("<A> p | [B] ~q") == Or(Diamond(Rel.A, p), Not(Diamond(Rel.B, q)))


def test_parse_unclosed_modality():
    with pytest.raises(FormulaSyntaxError) as e:
        parse("<A p")
    assert (e.value.line, e.value.column) == (1, 1)
    assert "unclosed" in str(e.value)


def test_parse_unknown_operator():
    with pytest.raises(FormulaSyntaxError, match="unknown operator"):
        parse("<D> p")


def test_parse_errors_report_position():
    with pytest.raises(FormulaSyntaxError) as e:
        parse("p &\n  (q | )")
    assert (e.value.line, e.value.column) == (2, 8)


@pytest.mark.parametrize("text", ["", "p q", "(p", "p |", "P", "~"])
def test_parse_rejects(text):
    with pytest.raises(FormulaSyntaxError):
        parse(text)


def test_precedence():
    # ~ binds tighter than modalities, which bind tighter than & then | then ->
    assert parse("~p & q | <A> p -> q") == implies(Or(conj(Not(p), q), Diamond(Rel.A, p)), q)
    assert parse("<A> ~p & q") == conj(Diamond(Rel.A, Not(p)), q)
    assert parse("p -> q -> p") == implies(p, implies(q, p))


def test_constants_and_unicode_aliases():
    assert parse("true") == TOP and parse("false") == BOT == Not(TOP)
    assert TOP == Or(Prop(TOP_VAR), Not(Prop(TOP_VAR)))
    assert parse("⟨B̄⟩ p ∧ ⟨L̄⟩ ¬q") == parse("<Bi> p & <Li> ~q")
    assert parse("[Bi] p") == box(Rel.BI, p)


@pytest.mark.parametrize("text,expected", [("~~p", "p"), ("~~~p", "~p"), ("p", "p")])
def test_normalize_double_negation(text, expected):
    f = Not(Not(Not(p))) if text == "~~~p" else (Not(Not(p)) if text == "~~p" else p)
    assert normalize(f) == parse(expected)


def test_parse_normalizes():
    assert parse("~~<A>~~p") == Diamond(Rel.A, p)


def test_round_trip_on_corpus():
    for f in corpus(FuzzConfig(seed=3, count=500)):
        assert parse(pretty(f)) == f


def test_size_counts_distinct_subformulas():
    assert size(parse("p")) == 1
    assert size(parse("p | q")) == 3
    assert size(parse("p | p")) == 2
    assert size(parse("<A> p | ~<A> p")) == 4
    assert variables(parse("p & true")) == ["p"]
    assert modal_depth(parse("<A> [B] p | <Li> q")) == 2


def test_subformulas_are_children_first():
    subs = subformulas(parse("<A> (p | q)"))
    assert subs[-1] == parse("<A> (p | q)")
    assert subs.index(p) < subs.index(Or(p, q))


def test_closure_of_p():
    t = closure(p)
    assert list(t.cl) == [p, Not(p)]
    assert t.width == 18


def test_closure_of_disjunction():
    t = closure(parse("p | q"))
    assert t.n_cl == 6 and t.width == 54


def test_closure_shares_existing_diamonds():
    t = closure(parse("<A> p"))
    assert set(t.cl) == {Diamond(Rel.A, p), Not(Diamond(Rel.A, p)), p, Not(p)}
    assert t.formulas.count(Diamond(Rel.A, p)) == 1
    assert t.width < 18 * t.size


def _or_tree(rng, names):
    if len(names) == 1:
        return Prop(names[0])
    k = int(rng.integers(1, len(names)))
    return Or(_or_tree(rng, names[:k]), _or_tree(rng, names[k:]))


def test_closure_arithmetic_exact_without_sharing():
    rng = np.random.default_rng(5)
    for _ in range(50):
        names = [f"v{i}" for i in range(int(rng.integers(1, 7)))]
        f = _or_tree(rng, names)
        t = closure(f)
        assert t.n_cl == 2 * size(f)
        assert t.width == 18 * size(f)


def test_closure_arithmetic_bounds_with_sharing():
    for f in corpus(FuzzConfig(seed=4, count=200)):
        t = closure(f)
        assert t.n_cl <= 2 * size(f)
        assert t.width <= 18 * size(f)


def test_negation_is_an_involution():
    t = closure(parse("<A> p & [Li] (q | ~<B> p)"))
    for i, g in enumerate(t.formulas):
        assert t.neg_index(t.neg_index(i)) == i
        assert t.formulas[t.neg_index(i)] == normalize(Not(g))


def test_closure_is_monotone():
    small = closure(parse("<B> p"))
    big = closure(parse("q | <A> <B> p"))
    assert set(small.cl) <= set(big.cl)


def test_reduced_closure_tracks_fewer_requests():
    f = parse("<A> p & [Li] ~p")
    full, red = closure(f), closure(f, "reduced")
    assert red.cl == full.cl
    assert red.width < full.width
    assert red.domain[Rel.LI] == full.domain[Rel.LI] & red.domain[Rel.LI]


def test_unknown_closure_kind():
    with pytest.raises(ValueError):
        closure(p, "tiny")
