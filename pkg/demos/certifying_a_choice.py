"""Convincing a skeptic from truncated runtime distributions.

A prover who knows every runtime law reveals each one only up to a captime.
The skeptic brackets each expected utility between what finished under the
cap (LB) and that plus the best case for the hidden mass (UB), and accepts
the top-LB candidate only if its LB beats every other UB minus epsilon.

Generous captimes always pass. Cut them too short and the check fails, and
then there really is a completion of the hidden tails that makes the
recommended candidate more than epsilon worse than a rival.
"""
from utiliconf import Discrete, Uniform
from utiliconf.verification import adversarial_extension, run_verification

u = Uniform(60.0)
dists = [
    Discrete([(4.0, 0.6), (30.0, 0.3), (200.0, 0.1)]),
    Discrete([(8.0, 0.5), (20.0, 0.4), (90.0, 0.1)]),
    Discrete([(15.0, 0.7), (45.0, 0.3)]),
]
EPS = 0.05

res = run_verification(dists, u, EPS)
print("exact utilities:", [round(x, 4) for x in res.utilities])
print("sufficient captimes:", [round(k, 3) for k in res.kappas])
for v in res.views:
    print(f"  algorithm {v.algorithm}: LB {v.lb:.4f}  UB {v.ub:.4f}")
print("certified:", res.certified, "winner:", res.winner)

short = [2.0, 5.0, 5.0]
res = run_verification(dists, u, EPS, short)
v = res.verdict
print(f"\nwith captimes {short}: certified={v.certified}, top-LB candidate {v.winner}, violators {list(v.violators)}")
i = v.violators[0]
ext_i, ext_s = adversarial_extension(dists[i], res.views[i], dists[v.winner], res.views[v.winner], u, EPS)
print(f"a completion consistent with everything disclosed: U_{i} = {ext_i.expected_utility(u):.4f}, "
      f"U_{v.winner} = {ext_s.expected_utility(u):.4f}")
print("so no skeptic could have accepted the recommendation from those captimes.")
