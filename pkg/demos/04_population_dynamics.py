"""Population dynamics: a stochastic version of the tree recursion.

Each generation resamples a population of messages; results are fixed by
the seed and do not depend on the number of worker threads.
"""
import time

from meanfield_opt import DilutedMatchingModel, atom_fraction, ks_distance, limit_distribution, run_alternating, run_chain

lam = 3.0
ref = limit_distribution(DilutedMatchingModel.from_lambda(lam), 4000)

# %% Chain from the upper boundary
t = time.perf_counter()
pop = run_chain(lam, "min", 60, 200_000, seed=7)
print(f"KS = {ks_distance(pop, ref):.4f}  atom = {atom_fraction(pop):.4f}  vs q = {ref.atom:.4f}  ({time.perf_counter() - t:.1f} s)")

# %% Alternating bounds at depth k
for k in (5, 10, 20):
    run = run_alternating(lam, "min", k, 50_000, seed=1)
    print(f"k = {k:2d}  E[B] - E[A] = {run.gap:.4f} +- {run.gap_stderr:.4f}")
