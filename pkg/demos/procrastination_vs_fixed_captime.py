"""Letting each candidate find its own captime.

Utilitarian Procrastination (UP) starts every candidate at a 1 s cap and
doubles a cap only once sampling noise no longer dominates the error caused
by capping. Candidates that are clearly worse get dropped long before anyone
needs to wait on their slow runs. Below, UP is compared with Naive at two
fixed caps under a utility that is worthless after one minute.
"""
import numpy as np

from utiliconf import ExperimentSpec, run_naive, run_up

spec = ExperimentSpec(utility="uniform:60", seed=3)
u = spec.utility_function()
names, dists = spec.source(0).names, spec.distributions()
utils = [d.expected_utility(u) for d in dists]

print("candidates (exact expected utility):")
for name, x in zip(names, utils):
    print(f"  {name}: {x:.4f}")

up = run_up(spec.source(0), u, spec.delta)
print(f"\nUP picked {up.winner_name} after {up.rounds} rounds, {up.total_time:,.0f} simulated seconds")
print("final caps:", ", ".join(f"{n}={k:g}" for n, k in zip(names, up.caps)))
print("dropped at round:", ", ".join(f"{names[i]}@{m}" for m, i in up.eliminations))

for kappa in (60.0, 600.0):
    nv = run_naive(spec.source(0), u, 0.1, spec.delta, kappa)
    ratio = nv.total_time / up.total_time
    print(f"Naive cap {kappa:g}s, epsilon 0.1: picked {nv.winner_name}, "
          f"{nv.total_time:,.0f} s ({ratio:.1f}x UP)")

share = np.array(up.per_algorithm_time) / up.total_time
print("\nshare of UP's time per candidate:", ", ".join(f"{n} {s:.0%}" for n, s in zip(names, share)))
