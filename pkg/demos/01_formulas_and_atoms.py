"""
Formulas, closures and atoms
============================

A walk through the objects every search is built on: parsed formulas,
closure tables, and atoms (maximal locally consistent sets of closure
formulas) together with the three dependency relations between them.
"""

# %%
# Formulas are parsed into a normal form with boxes written as negated
# diamonds.
from abbl import closure, parse, pretty
from abbl.formula import size

f = parse("[B] false & <Bi><Bi> true")
print(pretty(f), "| size", size(f))

# %%
# The closure of ``p`` has two formulas; tracking every request for each
# relation gives a table of 18 bits.
t = closure(parse("p"))
print("closure:", [pretty(g) for g in t.cl], "| width", t.width)

# %%
# There are 512 atoms for ``p``.  We collect the dependency relations as
# boolean matrices and look at them as a whole.
import numpy as np

from abbl.atoms import count_atoms, dep_a_m, dep_b_m, dep_li_m, enumerate_atoms

masks = [a.mask for a in enumerate_atoms(t)]
print("atoms:", len(masks), "=", count_atoms(t))
A = np.array([[dep_a_m(t, f, g) for g in masks] for f in masks])
B = np.array([[dep_b_m(t, f, g) for g in masks] for f in masks])
L = np.array([[dep_li_m(t, f, g) for g in masks] for f in masks])
print("density A %.3f  B %.3f  Li %.3f" % (A.mean(), B.mean(), L.mean()))

# %%
# B and Li are transitive, and they entangle with A; A itself is not
# transitive.
compose = lambda M, N: (M.astype(int) @ N.astype(int)) > 0
print("B transitive:", not (compose(B, B) & ~B).any())
print("Li transitive:", not (compose(L, L) & ~L).any())
print("A;B^-1 inside A:", not (compose(A, B.T) & ~A).any())
print("B;Li inside Li:", not (compose(B, L) & ~L).any())
print("A transitive:", not (compose(A, A) & ~A).any())
