"""Matching with a finite penalty lam/2 per unmatched vertex.

Sweeps lam, printing the unmatched fraction q, the cost split, and the
edge-participation density h at a few lengths.
"""
import numpy as np

from meanfield_opt import h_matching, longest_edge_limit, matching_edge_cost, q_from_lambda, total_diluted_cost

# %% Sweep
print(" lam      q        edge     penalty   total   longest")
for lam in (0.5, 1.0, 2.0, 3.0, 5.0, 10.0):
    q = q_from_lambda(lam)
    e = matching_edge_cost(q)
    print(f"{lam:4.1f}  {q:.6f}  {e:.6f}  {q * lam / 2:.6f}  {total_diluted_cost(lam):.6f}  {longest_edge_limit(q):.3f}")

# %% h(x): probability an edge of length x is used (times one), q = q(3)
q = q_from_lambda(3.0)
x = np.linspace(0, 3.0, 7)
for xi, hi in zip(x, h_matching(x, q)):
    print(f"  h({xi:.2f}) = {hi:.5f}")
print("h(lam) = q^2 :", h_matching(3.0, q), q * q)
