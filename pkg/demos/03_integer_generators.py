"""
Models over the integers
========================

``p & <Li> p & [Li](~p | <Li> p)`` asks for p infinitely often in the past,
so it has no finite model but is satisfiable over the integers.  The integer
search returns a compass generator that unfolds into ever larger windows of
such a model.
"""

# %%
from abbl import parse
from abbl.solver import sat_finite_symbolic, sat_integers, theoretical_bounds

phi = parse("p & <Li> p & [Li](~p | <Li> p)")
print("finite, up to 6 rows:", sat_finite_symbolic(phi, 6).status)
v = sat_integers(phi, 8)
gen = v.model
print("integers:", v.status, "| N =", gen.n, "| y0, y1, y2 =", gen.y0, gen.y1, gen.y2)

# %%
# The generator satisfies the generator conditions and can be unfolded.
from abbl.rows import check_generator, check_partially_fulfilling, expand_generator

print("generator problems:", check_generator(gen))
for k in range(4):
    W = expand_generator(gen, k)
    print(f"k={k}: window of {W.n} points, origin {W.origin},",
          "partially fulfilling:", not check_partially_fulfilling(W))

# %%
# The small-model bounds behind the decision procedure are astronomically
# large; they are computed exactly when feasible, else by digit count.
b = theoretical_bounds(1)
print("integers:", b.integers.value == 3 ** 256 * 2 ** 24, b.integers.digits, "digits")
print("finite:", b.finite.digits, "digits")
