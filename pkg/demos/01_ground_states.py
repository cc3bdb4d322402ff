"""Order-parameter curves and ground-state energies for matching and TSP.

Run: python3 demos/01_ground_states.py
"""
import math

import numpy as np

from meanfield_opt import MATCHING, TSP, fixed_point_g0, ground_state_energy, solve_order_parameter, verify_consistency

# %% Ground states from the curve area
for k in (MATCHING, TSP):
    curve = solve_order_parameter(k, k.c_star, 10.0, 1000)
    print(f"{k.name:9s} L* = {ground_state_energy(k):.10f}  G(0) = {fixed_point_g0(k, k.c_star):.6f}"
          f"  residual = {verify_consistency(k, curve):.1e}")
print(f"pi^2/12   = {math.pi**2 / 12:.10f}")

# %% The matching curve is log(1 + e^x); TSP has no closed form
m = solve_order_parameter(MATCHING, 1.0, 10.0, 400)
print("max |G_M - log(1+e^x)| =", np.max(np.abs(m.G - np.logaddexp(0, m.x))))

t = solve_order_parameter(TSP, 2.0, 10.0, 400)
for x in (-4.0, -1.0, 0.0, 1.0, 4.0):
    print(f"  x = {x:5.1f}   G_M = {m(x):.6f}   G_TSP = {t(x):.6f}")
