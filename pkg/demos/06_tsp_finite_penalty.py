"""TSP with a finite penalty: the tail constant C(lam) and its cost check."""
from meanfield_opt import TSP, cost_from_F, curve_area, run_iteration, tsp_constant_from_lambda, tsp_domain_length

for lam in (1.0, 2.0, 4.0, 8.0):
    C = tsp_constant_from_lambda(lam)
    print(f"lam = {lam:3.0f}  C = {C:.6f}  round trip {abs(tsp_domain_length(C) - lam):.1e}")

# %% Grid recursion cost against the curve area with W constant 4 - C
lam = 4.0
B = run_iteration("min2", lam, 2000, 400).B
print("grid", cost_from_F(B, "min2"), " area", 0.5 * curve_area(TSP, 4 - tsp_constant_from_lambda(lam)))
