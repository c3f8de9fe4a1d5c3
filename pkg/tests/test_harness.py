import json

import pytest

from abbl import parse
from abbl.atoms import CapacityError
from abbl.formula import modal_depth, variables
from abbl.harness import (
    BRUTE_FORCE_BITS, FuzzConfig, brute_force_sat, compare_one, corpus, differential_run,
    random_formula, report_lines,
)
from abbl.solver import SAT, UNSAT_AT_BOUND
from abbl.structures import model_check


def test_random_formula_is_deterministic():
    cfg = FuzzConfig(seed=7, count=50)
    assert corpus(cfg) == corpus(cfg)
    assert corpus(cfg) != corpus(FuzzConfig(seed=8, count=50))
    # a formula depends on its index only, not on the corpus size
    assert random_formula(cfg, 10) == random_formula(FuzzConfig(seed=7, count=20), 10)


def test_random_formula_respects_caps():
    cfg = FuzzConfig(seed=1, count=300, max_depth=2, max_vars=2)
    for f in corpus(cfg):
        assert modal_depth(f) <= 2
        assert set(variables(f)) <= {"p", "q"}


def test_random_formula_index_range():
    with pytest.raises(IndexError):
        random_formula(FuzzConfig(count=3), 3)


@pytest.mark.parametrize("kwargs", [{"count": -1}, {"max_n": 1}, {"max_depth": 0}, {"seed": -1}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FuzzConfig(**kwargs)


def test_brute_force_goldens():
    assert brute_force_sat(parse("p & ~p"), 4).status == UNSAT_AT_BOUND
    v = brute_force_sat(parse("[B] false & <Bi><Bi> true"), 5)
    assert v.status == SAT and v.stats["n"] == 4
    assert model_check(v.model, tuple(v.stats["interval"]), parse("[B] false & <Bi><Bi> true"))
    assert brute_force_sat(parse("<B> true & [B] false"), 5).status == UNSAT_AT_BOUND


def test_brute_force_finds_the_first_labeling():
    v = brute_force_sat(parse("p & <A> p"), 4)
    assert v.stats["n"] == 3
    assert v.model.sigma[(0, 1)] == frozenset({"p"}) and v.model.sigma[(1, 2)] == frozenset({"p"})


def test_brute_force_capacity():
    with pytest.raises(CapacityError):
        brute_force_sat(parse("p | q | r"), 5)
    assert BRUTE_FORCE_BITS == 24
    with pytest.raises(ValueError):
        brute_force_sat(parse("p"), 1)


def test_compare_one_reports_all_engines():
    rec = compare_one(parse("<A> p & [Li] ~p"), 4)
    assert rec["agree"] and set(rec["verdicts"]) == {"brute", "explicit", "symbolic"}
    assert rec["verdicts"]["brute"]["status"] == SAT


def test_compare_one_records_errors():
    rec = compare_one(parse("p | q | r"), 5)
    assert rec["verdicts"]["brute"]["status"] == "ERROR"
    assert not rec["agree"]


def test_small_differential_run():
    report = differential_run(FuzzConfig(seed=5, count=30, max_n=3))
    assert len(report["records"]) == 30 and report["disagreements"] == []
    lines = list(report_lines(report))
    assert len(lines) == 31
    assert json.loads(lines[-1])["summary"]["disagreements"] == 0
    assert set(report["percentiles"]) == {"brute", "explicit", "symbolic"}


def test_parallel_run_matches_sequential():
    cfg = FuzzConfig(seed=6, count=16, max_n=3)
    a, b = differential_run(cfg), differential_run(cfg, jobs=2)
    strip = lambda r: [{k: v for k, v in rec.items() if k != "times"} for rec in r["records"]]
    assert strip(a) == strip(b)


def test_empty_corpus():
    report = differential_run(FuzzConfig(count=0))
    assert report["records"] == [] and report["percentiles"] == {}
    assert json.loads(list(report_lines(report))[-1])["summary"]["formulas"] == 0


def test_single_variable_shallow_formulas():
    cfg = FuzzConfig(seed=1, count=50, max_depth=1, max_vars=1)
    for i in range(50):
        f = random_formula(cfg, i)
        assert modal_depth(f) <= 1 and set(variables(f)) <= {"p"}


def test_differential_at_the_smallest_bound():
    report = differential_run(FuzzConfig(seed=2, count=40, max_n=2))
    assert report["disagreements"] == []
    for rec in report["records"]:
        assert {v["n"] for v in rec["verdicts"].values()} <= {None, 2}
