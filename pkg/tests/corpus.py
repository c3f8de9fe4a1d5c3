"""Seeded structures shared by the test modules."""

from __future__ import annotations

import functools

import numpy as np

from abbl import closure, parse
from abbl.harness import FuzzConfig, random_formula
from abbl.structures import IntervalStructure, compass_from_interval, intervals

PHI_PAST = "p & <Li> p & [Li](~p | <Li> p)"


def random_structure(rng: np.random.Generator, n: int, names=("p", "q"), density=0.5) -> IntervalStructure:
    sigma = {
        iv: frozenset(v for v in names if rng.random() < density) for iv in intervals(n)
    }
    return IntervalStructure(n, sigma)


@functools.lru_cache(maxsize=None)
def random_corpus(count: int = 100, seed: int = 11, max_n: int = 5):
    """``(formula, interval structure, compass structure)`` triples with
    random formulas over p, q and random labelings of orders of size 2..max_n."""
    cfg = FuzzConfig(seed=seed, count=count, max_depth=2, max_size=8)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        f = random_formula(cfg, i)
        S = random_structure(rng, int(rng.integers(2, max_n + 1)))
        out.append((f, S, compass_from_interval(S, closure(f))))
    return tuple(out)


PERIODIC_RULES = {
    "all": lambda x, y: True,
    "none": lambda x, y: False,
    "unit": lambda x, y: y - x == 1,
    "short": lambda x, y: y - x <= 2,
    "even": lambda x, y: (x + y) % 2 == 0,
}

PERIODIC_FORMULAS = (
    "p", "~p", "<A> p", "[B] p", "<Bi> ~p", "<Li> p", "[A] <B> p", "<A> p & [Li] ~p",
    "<B> p | <Bi> p", "[Bi] <A> p", "<A> ~p | <Li> ~p",
)


def periodic_structure(rule: str, n: int) -> IntervalStructure:
    r = PERIODIC_RULES[rule]
    return IntervalStructure(n, {iv: frozenset({"p"}) if r(*iv) else frozenset() for iv in intervals(n)})


@functools.lru_cache(maxsize=None)
def periodic_corpus(sizes=(8, 9, 10)):
    """Regular labelings whose types repeat, so they have compatible rows."""
    out = []
    for text in PERIODIC_FORMULAS:
        f = parse(text)
        t = closure(f)
        for rule in PERIODIC_RULES:
            for n in sizes:
                out.append((f, rule, compass_from_interval(periodic_structure(rule, n), t)))
    return tuple(out)
