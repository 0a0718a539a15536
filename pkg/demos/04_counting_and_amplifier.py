"""Counting Hecke returns near a geodesic segment, then the amplifier sums."""

import numpy as np

from geodesic_amp_lab.hecke_counting import (
    amplifier_sum_checks, count_n, default_segment, geodesic_form, scan_counts,
)
from geodesic_amp_lab.quaternion_orders import default_order

R = default_order()
seg = default_segment()
f = geodesic_form(seg)
print(f"segment form: {f.alpha:.4f} z^2 + {f.beta:.4f} z + {f.gamma:.4f}  (disc {f.discriminant:.6f})")

for n in (1, 5, 25, 125):
    nc = count_n(seg, n, R)
    cells = "  ".join(f"k={r.kappa:<4} M={r.count:<4} ratio={r.ratio:.3f}" for r in nc.records)
    print(f"n = {n:3d}: {nc.enumerated:5d} elements in the box, {nc.geometric:4d} within distance 1 | {cells}")

rep = scan_counts(seg, R, 300)
print(f"\nscan n <= 300: max ratio {rep.max_ratio:.3f}, drift {rep.drift:.3f}, "
      f"prefilter false rejections {rep.false_rejections}")

rng = np.random.default_rng(1)
alpha = rng.normal(size=500) + 1j * rng.normal(size=500)
a = amplifier_sum_checks(alpha)
print(f"\namplifier N = {a.N}: first sum / N(sum|a|)^2 = {a.lhs1 / a.rhs1_base:.4f} (<= H_N = {a.const1:.3f}), "
      f"second sum / sum|a|^2 = {a.C2:.3f} (<= {a.const2:.1f})")
