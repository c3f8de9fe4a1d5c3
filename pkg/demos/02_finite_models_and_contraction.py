"""
Finite models and contraction
=============================

Solve a formula over finite orders with both engines, then take a larger
structure with repeating rows and contract it row band by row band.
"""

# %%
from abbl import closure, parse
from abbl.harness import brute_force_sat
from abbl.solver import sat_finite_explicit, sat_finite_symbolic

f = parse("[B] false & <Bi><Bi> true")
for name, verdict in (("brute force", brute_force_sat(f, 5)),
                      ("explicit", sat_finite_explicit(f, 6)),
                      ("symbolic", sat_finite_symbolic(f, 5))):
    print(f"{name:12s} {verdict.status} N={verdict.stats['n']}")

# %%
# The model found is a compass structure: one atom per point (x, y).
G = sat_finite_symbolic(f, 5).model
print(G.to_dot().splitlines()[0], "...", len(G.points()), "points")

# %%
# A regular labeling of a 10-point order: p everywhere.
from abbl.rows import contract, contract_fully, rows_compatible, shading
from abbl.structures import (
    IntervalStructure, check_consistency, check_fulfillment, compass_from_interval, features,
    intervals,
)

g = parse("<A> p | [B] ~p")
S = IntervalStructure(10, {iv: {"p"} for iv in intervals(10)})
H = compass_from_interval(S, closure(g))
print("rows:", H.n - 1, "| distinct shadings:", len({shading(H, y) for y in range(1, H.n)}))

# %%
# Compatible rows share their shading and unit atom, and the witnesses above
# the upper row can be matched below.  Contracting removes the band between.
pairs = [(a, b) for b in range(2, H.n) for a in range(1, b) if rows_compatible(H, a, b)]
print("compatible pairs:", pairs[:6], "...")
y0, y1 = pairs[0]
K = contract(H, y0, y1)
print(f"contract {y0}..{y1}: N {H.n} -> {K.n}",
      "| valid:", not check_consistency(K) and not check_fulfillment(K),
      "| features g:", features(K, g) == features(H, g))

# %%
# Repeating until no compatible rows remain gives a small model.
small, steps = contract_fully(H)
print("fully contracted to N =", small.n, "via", steps)
