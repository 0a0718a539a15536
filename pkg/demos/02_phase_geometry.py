"""Critical points of the two-geodesic phase and their Hessians."""

import math

import numpy as np

from geodesic_amp_lab.group_geometry import GroupElement, a_mat, k_mat
from geodesic_amp_lab.phase_critical import (
    PhaseContext, classify_degeneracy, config_from_critical_point, d2_family, d2_pair,
    find_critical_points, hessian_analytic, hessian_numeric, psi_second_numeric, psi_third_numeric,
    reduced_second_derivative,
)

# a pair built to have a critical point at x1 = 0.3, x2 = -0.2 with aperture h = 0.7
g, theta = config_from_critical_point(0.4, 0.3, -0.2, 0.7, 1)
ctx = PhaseContext(g, 0.4)
print("configuration:", classify_degeneracy(ctx).kind)
for cp in find_critical_points(ctx):
    D, det = hessian_analytic(cp, ctx)
    Dn = hessian_numeric(cp, ctx)
    print(f"theta' = {cp.theta:.6f}  h = {cp.h:+.4f}  det D = {det:+.6f}  "
          f"|D - D_fd| = {np.abs(D - Dn).max():.1e}")
    print(f"   psi'' analytic {reduced_second_derivative(cp):+.8f}  numeric {psi_second_numeric(cp, ctx):+.8f}")

# D2: the second geodesic crosses the first at angle 2 alpha
rho = 0.6
al = math.acos(rho)
ctx = PhaseContext(GroupElement(a_mat(0.3) @ k_mat(2 * al) @ a_mat(0.5)), rho)
lab = classify_degeneracy(ctx)
print(f"\n{lab.kind}: witness theta = {lab.witness:.6f}, |psi'''| = {abs(psi_third_numeric(lab.witness, ctx)):.4f}")

# nearby configurations split the double point into two with h ~ eps^{1/2}
for eps in (1e-2, 1e-3, 1e-4):
    p1, p2 = d2_pair(PhaseContext(d2_family(0.3, al, eps, 0.5), rho), 0.3)
    print(f"eps = {eps:.0e}: h = {p1.h:+.5f}, {p2.h:+.5f}   gap = {abs(p1.theta - p2.theta):.5f}")
