"""Outer spectral radius as the lag fraction grows, showing the cusps at 1/m."""
import numpy as np

from lagspec.lag2d import LagLaw, deep_lag_radius

r = 0.5
print(f"r = {r}; small-lag limit sqrt(r(r+1)) = {np.sqrt(r * (r + 1)):.5f}")
for beta in np.linspace(0.02, 0.9, 45):
    s = deep_lag_radius(LagLaw(r, beta))
    bar = "#" * int(60 * (s - 0.8))
    print(f"beta={beta:5.3f}  s_ext={s:.5f}  {bar}")
