"""Radial CDF and eigenvector correlator of the unit-lag matrix against sampling.

Run with ``python demos/unit_lag_vs_monte_carlo.py``; takes about a minute.
"""
import numpy as np

from lagspec import formats, lag2d, mc, quasi1d

N, T, SAMPLES, SEED = 256, 512, 60, 1
r = N / T

spec = mc.EnsembleSpec(N, T, 1, samples=SAMPLES, seed=SEED)
res = mc.run_ensemble(spec)
s_ext = quasi1d.spectral_radii(r).s_ext
edges = mc.default_edges(s_ext, 32)
emp = mc.empirical_radial(res, edges)

F = lag2d.unit_lag_cdf(edges[1:], r)
O = lag2d.unit_lag_overlap(emp.centers, r)
print(f"N={N} T={T} samples={SAMPLES} rejected={res.rejected}")
print(f"{'s':>7} {'F mc':>8} {'F':>8} {'O mc':>8} {'O':>8}")
for k in range(0, edges.size - 1, 3):
    print(f"{edges[k + 1]:7.3f} {emp.cdf[k]:8.4f} {F[k]:8.4f} {emp.overlap[k]:8.4f} {O[k]:8.4f}")
print(f"sup CDF error {np.max(np.abs(emp.cdf - F)):.4f}")
print(f"bulk correlator error {formats.overlap_bulk_error(edges, emp.overlap, O, 0.0, s_ext):.3f}")
