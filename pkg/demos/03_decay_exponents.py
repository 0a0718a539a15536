"""Decay of the restriction integral in s for three geometric regimes.

Same configurations as the acceptance run, s from 100 to 1600 in
half-octave steps; takes a couple of minutes.
"""

import math
import numpy as np

from geodesic_amp_lab.group_geometry import GroupElement, a_mat, k_mat, lie_exp, n_align_element
from geodesic_amp_lab.oscillatory_quadrature import (
    BumpProfile, DecaySeries, fit_decay, restriction_integral, smooth_theta_window,
)
from geodesic_amp_lab.phase_critical import PhaseContext, classify_degeneracy, config_from_critical_point

S = 100.0 * 2.0 ** (np.arange(9) / 2)


def series(g, rho, bump, window=None):
    return np.array([restriction_integral(float(s), rho * s, g, bump, bump, theta_window=window).value
                     for s in S])


g, _ = config_from_critical_point(0.3, 0.5, 0.5, 2.0, -1)
v = series(g, 0.3, BumpProfile("plateau", 0.16))
print(f"transverse   slope {fit_decay(DecaySeries(S, v)).slope:+.3f}   (one nondegenerate point: -3/2)")

rho = 0.2
g = GroupElement(a_mat(0.5) @ k_mat(2 * math.acos(rho)) @ a_mat(-0.5))
w = classify_degeneracy(PhaseContext(g, rho)).witness
v = series(g, rho, BumpProfile("plateau", 0.2), smooth_theta_window(w, 0.8))
print(f"D2           slope {fit_decay(DecaySeries(S, v)).slope:+.3f}   (cubic degeneracy: -4/3)")

g = GroupElement(lie_exp(np.array([[0.0, 0.1], [0.1 / math.e, 0.0]])))
n = n_align_element(g.m)[0]
v = series(g, 0.0, BumpProfile("plateau", 0.25), smooth_theta_window(math.pi / 2, 1.5))
fit = fit_decay(DecaySeries(S, v, n), "power-times-(1+sn)^{-1/2}")
print(f"near-aligned slope {fit.slope:+.3f}   after removing (1+sn)^(-1/2), n = {n:.4f} (target -1)")
