"""Random formulas, the brute-force oracle and the differential runner."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from abbl.atoms import CapacityError
from abbl.formula import (
    BOT, TOP, Diamond, Formula, Not, Or, Prop, RELATIONS, normalize, pretty, variables,
)
from abbl.solver import (
    SAT, UNSAT_AT_BOUND, SolverVerdict, sat_finite_explicit, sat_finite_symbolic,
)
from abbl.structures import (
    IntervalStructure, evaluate, interval_index, intervals, model_check,
)

log = logging.getLogger(__name__)

#: Largest labeling space (variables times intervals, in bits) brute force accepts.
BRUTE_FORCE_BITS = 24
_CHUNK_BITS = 16


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 0
    count: int = 500
    max_depth: int = 3
    max_vars: int = 2
    max_n: int = 5
    max_size: int = 12
    node_budget: int | None = 50_000_000

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        for name in ("max_depth", "max_vars", "max_n", "max_size"):
            if getattr(self, name) < (2 if name == "max_n" else 1):
                raise ValueError(f"{name} is too small")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


# -- random formulas ---------------------------------------------------------------

_VARS = "pqrstuvw"


def random_formula(cfg: FuzzConfig, index: int) -> Formula:
    """A formula drawn from a fixed weighted grammar, deterministic in
    ``(cfg.seed, index)``.

    Leaves are variables (occasionally a constant); inner nodes are negation,
    disjunction, conjunction, or one of the eight modalities (four diamonds
    and their dual boxes, equally likely).
    """
    if not 0 <= index < max(cfg.count, 1):
        raise IndexError("formula index outside the corpus")
    rng = np.random.default_rng([cfg.seed, index])
    names = _VARS[: cfg.max_vars]
    budget = [cfg.max_size]

    def leaf() -> Formula:
        if rng.random() < 0.08:
            return TOP if rng.random() < 0.5 else BOT
        return Prop(names[rng.integers(len(names))])

    def gen(depth: int) -> Formula:
        budget[0] -= 1
        if budget[0] <= 0 or rng.random() < 0.3:
            return leaf()
        kind = rng.choice(4, p=[0.15, 0.15, 0.15, 0.55] if depth > 0 else [0.4, 0.3, 0.3, 0.0])
        if kind == 0:
            return Not(gen(depth))
        if kind in (1, 2):
            a, b = gen(depth), gen(depth)
            return Or(a, b) if kind == 1 else Not(Or(Not(a), Not(b)))
        rel = RELATIONS[rng.integers(4)]
        if rng.random() < 0.5:
            return Diamond(rel, gen(depth - 1))
        return Not(Diamond(rel, Not(gen(depth - 1))))

    return normalize(gen(cfg.max_depth))


def corpus(cfg: FuzzConfig) -> list[Formula]:
    return [random_formula(cfg, i) for i in range(cfg.count)]


# -- brute force -------------------------------------------------------------------

def brute_force_sat(f: Formula, max_n: int) -> SolverVerdict:
    """Try every labeling of every order ``0..N-1`` with ``2 <= N <= max_n``.

    Labelings of one order are numbered so that bit ``i * v + j`` of the code
    is variable ``j`` on interval ``i`` (row-major interval order); the first
    witnessing code is reported, together with the first interval where the
    formula holds.
    """
    if max_n < 2:
        raise ValueError("max_n must be at least 2")
    f = normalize(f)
    names = variables(f)
    bits = len(names) * len(intervals(max_n))
    if bits > BRUTE_FORCE_BITS:
        raise CapacityError(f"brute force needs {bits} labeling bits, cap is {BRUTE_FORCE_BITS}")
    start = time.perf_counter()
    tried = 0
    for n in range(2, max_n + 1):
        m = len(intervals(n))
        v = len(names)
        total = 1 << (m * v)
        chunk = min(total, 1 << _CHUNK_BITS)
        for lo in range(0, total, chunk):
            codes = np.arange(lo, lo + chunk, dtype=np.int64)
            vals = {
                name: ((codes[:, None] >> (np.arange(m) * v + j)) & 1).astype(bool)
                for j, name in enumerate(names)
            }
            truth = evaluate([f], n, vals)[f]
            tried += chunk
            hits = np.flatnonzero(truth.any(axis=1))
            if hits.size:
                code = int(codes[hits[0]])
                at = intervals(n)[int(np.flatnonzero(truth[hits[0]])[0])]
                S = _decode(code, n, names)
                if not model_check(S, at, f):
                    raise AssertionError("brute-force witness failed model checking")
                return SolverVerdict(SAT, S, {
                    "n": n, "rows": n - 1, "interval": list(at), "labelings": tried,
                    "seconds": time.perf_counter() - start,
                })
    return SolverVerdict(UNSAT_AT_BOUND, None, {
        "n": max_n, "rows": max_n - 1, "labelings": tried, "seconds": time.perf_counter() - start,
    })


def _decode(code: int, n: int, names: list[str]) -> IntervalStructure:
    v = len(names)
    sigma = {}
    for p in intervals(n):
        i = interval_index(*p)
        sigma[p] = frozenset(nm for j, nm in enumerate(names) if code >> (i * v + j) & 1)
    return IntervalStructure(n, sigma)


# -- differential testing ---------------------------------------------------------------

ENGINES = ("brute", "explicit", "symbolic")


def compare_one(f: Formula, max_n: int, budget: int | None = None) -> dict:
    """Run the three engines at aligned bounds on one formula."""
    runs = {
        "brute": lambda: brute_force_sat(f, max_n),
        "explicit": lambda: sat_finite_explicit(f, max_n, budget),
        "symbolic": lambda: sat_finite_symbolic(f, max_n - 1, budget),
    }
    verdicts, times = {}, {}
    for name, run in runs.items():
        t0 = time.perf_counter()
        try:
            v = run()
            verdicts[name] = {"status": v.status, "n": v.stats.get("n") if v.sat else None}
        except CapacityError as e:
            verdicts[name] = {"status": "ERROR", "n": None, "error": str(e)}
        times[name] = time.perf_counter() - t0
    keys = {(v["status"], v["n"]) for v in verdicts.values()}
    return {"formula": pretty(f), "verdicts": verdicts, "times": times, "agree": len(keys) == 1}


def _work(args) -> dict:
    cfg, index = args
    rec = compare_one(random_formula(cfg, index), cfg.max_n, cfg.node_budget)
    rec["index"] = index
    return rec


def differential_run(cfg: FuzzConfig, jobs: int = 1,
                     on_record: Callable[[dict], None] | None = None) -> dict:
    """Compare all engines on the seeded corpus; disagreements are report
    content, not exceptions."""
    items = [(cfg, i) for i in range(cfg.count)]
    start = time.perf_counter()
    if jobs > 1 and items:
        with ProcessPoolExecutor(jobs) as pool:
            records = list(pool.map(_work, items, chunksize=8))
    else:
        records = [_work(it) for it in items]
    records.sort(key=lambda r: r["index"])
    if on_record is not None:
        for r in records:
            on_record(r)
    report = {
        "config": asdict(cfg),
        "records": records,
        "disagreements": [r for r in records if not r["agree"]],
        "seconds": time.perf_counter() - start,
        "percentiles": _percentiles(records),
    }
    return report


def _percentiles(records: list[dict]) -> dict:
    out = {}
    for name in ENGINES:
        ts = np.array([r["times"][name] for r in records]) if records else np.zeros(0)
        if ts.size:
            p50, p90, p99 = np.percentile(ts, [50, 90, 99])
            out[name] = {"p50": float(p50), "p90": float(p90), "p99": float(p99),
                         "max": float(ts.max())}
    return out


def report_lines(report: dict) -> Iterable[str]:
    """The report as JSON lines: one record per formula, then a summary."""
    for r in report["records"]:
        yield json.dumps(r, sort_keys=True)
    yield json.dumps({"summary": {
        "formulas": len(report["records"]),
        "disagreements": len(report["disagreements"]),
        "seconds": report["seconds"],
        "percentiles": report["percentiles"],
    }}, sort_keys=True)
