"""Why a fixed captime is hard to pick.

Naive configuration runs every candidate the same number of times at one
captime. Too short a cap and the tail penalty u(kappa) eats the accuracy
budget, so the run count explodes. Too long and slow runs burn time that
adds nothing. This script sweeps the cap on the shipped benchmark family
and prints where the total cost bottoms out.
"""
from utiliconf import ExperimentSpec, sweep_captime
from utiliconf.harness import mean_by
from utiliconf.procedures import naive_sample_count

EPS = 0.1
GRID = (320.0, 400.0, 600.0, 1000.0, 2000.0, 3000.0, 5000.0, 10000.0, 100000.0)

spec = ExperimentSpec(procedures=("naive",), epsilons=(EPS,), captimes=GRID, trials=3, seed=1)
u = spec.utility_function()
means = mean_by(sweep_captime(spec).rows, ("kappa",))

print(f"Naive with epsilon={EPS}, delta={spec.delta}, utility {u.to_spec()}\n")
print(f"{'captime':>9} {'u(cap)':>8} {'runs/arm':>9} {'total time (s)':>15}")
for k in GRID:
    m = naive_sample_count(5, spec.delta, EPS, u(k))
    print(f"{k:9g} {u(k):8.4f} {m:9d} {means[(k,)]:15.4g}")

best = min(GRID, key=lambda k: means[(k,)])
print(f"\ncheapest cap on this grid: {best:g} s")
print("Near u(cap) = epsilon the run count diverges; far out, each capped run just gets longer.")
