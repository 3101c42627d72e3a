"""Why the symmetrised spectrum does not determine the complex one.

The unit-lag matrix at r = 1 is not normal, so treating its Hermitian part
as the projection of a rotationally symmetric law (the inverse Abel
transform) gives a radial density that differs from the true one.
Takes a couple of minutes.
"""
import numpy as np

from lagspec import mc, quasi1d

r = 1.0
s = np.linspace(0.05, 1.95, 20)
abel = quasi1d.abelized_density(s, r)
true = quasi1d.hl_density(s, r)

res = mc.run_ensemble(mc.EnsembleSpec(256, 256, 1, samples=40, seed=3), overlaps=False)
edges = np.linspace(0, 2, 41)
emp = mc.empirical_radial(res, edges)
hist = np.interp(s, emp.centers, emp.density)

print(f"{'s':>6} {'true':>8} {'Abelized':>9} {'MC':>8}")
for row in zip(s, true, abel, hist):
    print("{:6.3f} {:8.4f} {:9.4f} {:8.4f}".format(*row))
