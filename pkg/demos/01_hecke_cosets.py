"""Hecke coset representatives in the shipped maximal order.

Counts classes R(1)\\R(m), checks them against sigma_1(m), and verifies the
composition rule T_p T_p = T_{p^2} + p Id at the level of cosets.
"""

import math

from geodesic_amp_lab.quaternion_orders import coset_reps, composition_multiset, default_order, sigma1

R = default_order()
print(f"algebra (a, b) = ({R.alg.a}, {R.alg.b}), level q = {R.q}")

for m in range(1, 26):
    if math.gcd(m, R.q) != 1:
        continue
    H = coset_reps(R, m)
    print(f"m = {m:2d}: {len(H):3d} classes (sigma_1 = {sigma1(m)}), entry bound used {H.entry_bound}")

p = 5
res = composition_multiset(R, p)
counts = res["counts"]
print(f"\nproducts of T_{p} with itself land in {len(counts)} classes of R({p * p})")
print(f"scalar class hit {counts[res['scalar_index']]} times, every other class once; unmatched {res['unmatched']}")
