"""Exact optimisation on small random instances against the limit theory."""
from meanfield_opt import (
    ensemble_stats,
    held_karp_tsp,
    min_diluted_matching,
    q_from_lambda,
    sample_instance,
    total_diluted_cost,
)

# %% One instance
g = sample_instance(12, seed=3)
sol = min_diluted_matching(g, 3.0)
print("matching:", sol.edges, "unmatched", sol.unmatched_count, "cost", round(sol.cost, 4))
print("tour cost", round(held_karp_tsp(sample_instance(10, 3)).cost, 4))

# %% Ensemble at n = 16
s = ensemble_stats(16, 3.0, 200, seed=12345)
print(f"unmatched {s.unmatched_fraction:.4f}  (limit {q_from_lambda(3.0):.4f})")
print(f"cost/vertex {s.cost_per_vertex:.4f}  (limit {total_diluted_cost(3.0):.4f})")
print("participation", s.participation.round(3))
print("limit h      ", s.h_predicted().round(3))
