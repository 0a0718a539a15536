"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Tolerances are the stated ones.  Criteria whose stated formulas disagree
with the derived ones are checked literally and fail; their lines also show
how the derived formulas fare.
"""

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from oracles import conical_legendre
from geodesic_amp_lab.amplifier_model import conditional_exponents, solve_preset
from geodesic_amp_lab.group_geometry import GroupElement, a_mat, k_mat, lie_exp, n_align_element
from geodesic_amp_lab.hecke_counting import amplifier_sum_checks, default_segment, scan_counts
from geodesic_amp_lab.oscillatory_quadrature import (
    BumpProfile, DecaySeries, fit_decay, octave_drop, restriction_integral, smooth_theta_window,
)
from geodesic_amp_lab.phase_critical import (
    PhaseContext, classify_degeneracy, config_from_critical_point, d2_family, d2_pair,
    find_critical_points, hessian_analytic, hessian_numeric, psi_second_numeric, psi_third_numeric,
    reduced_second_derivative,
)
from geodesic_amp_lab.quaternion_orders import coset_reps, composition_multiset, default_order, sigma1
from geodesic_amp_lab.spherical_kernels import (
    kernel_support_mass, spherical_phi, synthesize_profile, two_sided_window,
)

R = default_order()
S_GRID = 100.0 * 2.0 ** (np.arange(9) / 2)  # 100 .. 1600, half-octave steps


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def random_ctx(rng, scale=0.8):
    X = rng.normal(scale=scale, size=(2, 2))
    X[1, 1] = -X[0, 0]
    return PhaseContext(GroupElement(lie_exp(X)), float(rng.uniform(0.1, 0.9)))


def random_critical_points(seed, count):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        ctx = random_ctx(rng)
        out += [(cp, ctx) for cp in find_critical_points(ctx) if abs(cp.h) > 1e-3]
    return out[:count]


def test_c01_hecke_degrees(capsys):
    t0 = time.perf_counter()
    bad = [m for m in range(1, 51) if math.gcd(m, R.q) == 1 and len(coset_reps(R, m)) != sigma1(m)]
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    assert report(capsys, 1, ok, f"sigma_1(m) classes for all (m,{R.q})=1, m<=50; mismatches {bad}; {dt:.1f}s")


def test_c02_hecke_composition(capsys):
    p = 5
    res = composition_multiset(R, p)
    counts = res["counts"]
    scalar = int(counts[res["scalar_index"]])
    others = np.delete(counts, res["scalar_index"])
    ok = res["unmatched"] == 0 and scalar == p + 1 and np.all(others == 1) and counts.sum() == (p + 1) ** 2
    assert report(capsys, 2, ok, f"T_{p} T_{p} = T_{p * p} + {p} Id: scalar class x{scalar}, "
                                 f"{others.size} classes x1, unmatched {res['unmatched']}")


def test_c03_hessian_fidelity(capsys):
    t0 = time.perf_counter()
    pts = random_critical_points(11, 100)
    err_stated = err_derived = det_stated = det_derived = 0.0
    for cp, ctx in pts:
        Dn = hessian_numeric(cp, ctx)
        S, det_s = hessian_analytic(cp, ctx, form="stated")
        D, det_d = hessian_analytic(cp, ctx, form="derived")
        dn = np.linalg.det(Dn)
        err_stated = max(err_stated, np.linalg.norm(S - Dn) / np.linalg.norm(Dn))
        err_derived = max(err_derived, np.linalg.norm(D - Dn) / np.linalg.norm(Dn))
        det_stated = max(det_stated, abs(dn - det_s) / max(1.0, abs(dn)))
        det_derived = max(det_derived, abs(dn - det_d) / max(1.0, abs(dn)))
    dt = time.perf_counter() - t0
    ok = err_stated < 1e-6 and det_stated < 1e-8 and dt < 30
    assert report(capsys, 3, ok, f"{len(pts)} points; stated D rel err {err_stated:.2e}, (3/8) det err "
                                 f"{det_stated:.2e} | derived D {err_derived:.2e}, (1/2) det {det_derived:.2e}; "
                                 f"{dt:.1f}s")


def test_c04_reduced_phase(capsys):
    pts = random_critical_points(12, 50)
    stated = derived = 0.0
    for cp, ctx in pts:
        num = psi_second_numeric(cp, ctx)
        stated = max(stated, abs(num - reduced_second_derivative(cp, "stated")) / abs(num))
        derived = max(derived, abs(num - reduced_second_derivative(cp, "derived")) / abs(num))
    third = []
    for rho in (0.3, 0.6, 0.8):
        for y in (-0.4, 0.3):
            for sign in (1, -1):
                al = math.acos(rho)
                ctx = PhaseContext(GroupElement(a_mat(y) @ k_mat(sign * 2 * al) @ a_mat(0.5)), rho)
                third.append(abs(psi_third_numeric(classify_degeneracy(ctx).witness, ctx)))
    ok = stated < 1e-5 and min(third) > 0.1
    assert report(capsys, 4, ok, f"{len(pts)} points; psi'' vs -(3/2)k^2(1-e^2h) rel err {stated:.2e} | "
                                 f"vs -(1/2)k^2(1-e^2h) {derived:.2e}; min |psi'''| at "
                                 f"{len(third)} D2 witnesses {min(third):.3f}")


def test_c05_d2_scaling(capsys):
    rho = 0.6
    al = math.acos(rho)
    eps = np.logspace(-4, -2, 9)
    hs, gaps = [], []
    for e in eps:
        ctx = PhaseContext(d2_family(0.3, al, e, 0.5), rho)
        p1, p2 = d2_pair(ctx, 0.3)
        hs.append(abs(p1.h))
        gaps.append(abs(p1.theta - p2.theta))
    sh = np.polyfit(np.log(eps), np.log(hs), 1)[0]
    sg = np.polyfit(np.log(eps), np.log(gaps), 1)[0]
    ok = abs(sh - 0.5) <= 0.05 and abs(sg - 0.5) <= 0.05
    assert report(capsys, 5, ok, f"h(eps) exponent {sh:.4f}, theta gap exponent {sg:.4f}")


def test_c06_spherical_function(capsys):
    err = 0.0
    for s in (5.0, 20.0, 50.0):
        for r in np.linspace(0.1, 3.0, 30):
            err = max(err, abs(spherical_phi(s, r) - conical_legendre(s, r)))
    at0 = max(abs(spherical_phi(s, 0.0) - 1) for s in (5.0, 20.0, 50.0))
    ok = err < 1e-8 and at0 < 1e-12
    assert report(capsys, 6, ok, f"max |plane wave - Legendre| {err:.2e}; |phi_s(0) - 1| {at0:.1e}")


def test_c07_kernel_profile(capsys):
    sups, mass = [], []
    for t in (100.0, 200.0, 400.0):
        prof = synthesize_profile(two_sided_window(t), 2, np.linspace(0, 2, 201))
        sups.append(float(prof.normalized().max()))
        mass.append(kernel_support_mass(prof))
    ratio = max(sups) / min(sups)
    ok = ratio < 2 and max(mass) < 1e-6
    assert report(capsys, 7, ok, f"normalized sups {[round(v, 3) for v in sups]} (ratio {ratio:.3f}); "
                                 f"mass outside radius 1 <= {max(mass):.1e}")


def _series(g, rho, b1, b2, window=None):
    vals = [restriction_integral(float(s), rho * float(s), g, b1, b2, theta_window=window).value for s in S_GRID]
    return np.array(vals)


def test_c08_decay_exponents(capsys):
    t0 = time.perf_counter()
    fits = {}
    # D2: g = a(y) k(2 alpha) a(-y), window on the branch through the double point
    rho = 0.2
    al = math.acos(rho)
    g = GroupElement(a_mat(0.5) @ k_mat(2 * al) @ a_mat(-0.5))
    wit = classify_degeneracy(PhaseContext(g, rho)).witness
    b = BumpProfile("plateau", 0.2)
    v = _series(g, rho, b, b, smooth_theta_window(wit, 0.8))
    fits["D2"] = (fit_decay(DecaySeries(S_GRID, v)).slope, -4 / 3)
    # generic transverse: one nondegenerate critical point
    g, _ = config_from_critical_point(0.3, 0.5, 0.5, 2.0, -1)
    b = BumpProfile("plateau", 0.16)
    v = _series(g, 0.3, b, b)
    fits["transverse"] = (fit_decay(DecaySeries(S_GRID, v)).slope, -3 / 2)
    # near-aligned: n ~ 0.1, one theta branch, normalized model
    g = GroupElement(lie_exp(np.array([[0.0, 0.1], [0.1 / math.e, 0.0]])))
    n = n_align_element(g.m)[0]
    b = BumpProfile("plateau", 0.25)
    win = smooth_theta_window(math.pi / 2, 1.5)
    for rho in (0.0, 0.5):
        v = _series(g, rho, b, b, win)
        fits[f"near-aligned rho={rho}"] = (
            fit_decay(DecaySeries(S_GRID, v, n), "power-times-(1+sn)^{-1/2}").slope, -1.0)
    dt = time.perf_counter() - t0
    ok = all(abs(got - want) <= 0.1 for got, want in fits.values()) and dt < 600
    detail = "; ".join(f"{k} {got:.3f} (target {want:.3f})" for k, (got, want) in fits.items())
    assert report(capsys, 8, ok, f"{detail}; {dt:.0f}s")


def test_c09_rapid_decay_thresholds(capsys):
    s = 500.0
    drops = {}
    for beta in (2.0, 8.0):
        drops[f"line b={beta:g}"] = octave_drop(s, beta, "lineint1")["drop"]
        drops[f"phi-line b={beta:g}"] = octave_drop(s, beta, "lineint2", y=-0.5)["drop"]
        drops[f"pair b={beta:g}"] = octave_drop(s, beta, "pair")["drop"]
    ok = all(d >= 1e3 for d in drops.values())
    detail = ", ".join(f"{k}: {d:.3g}" for k, d in drops.items())
    assert report(capsys, 9, ok, f"octave drops at s=500 ({detail})")


def test_c10_counting_bound(capsys):
    rep = scan_counts(default_segment(), R, 2000)
    ok = rep.ok
    assert report(capsys, 10, ok, f"{len(rep.counts)} n <= 2000 coprime to {R.q}; max M/bound "
                                  f"{rep.max_ratio:.3f}, dyadic drift {rep.drift:.3f}, prefilter false "
                                  f"rejections {rep.false_rejections} (worst ratio {rep.worst_prefilter_ratio:.2f})")


def test_c11_exponent_ledger(capsys):
    got = {
        "period-a": solve_preset("period-a").bound.const,
        "period-b": solve_preset("period-b").bound.const,
        "onspec": (solve_preset("onspec").bound.const, solve_preset("onspec").bound.coef("beta")),
        "offspec": (solve_preset("offspec").const, solve_preset("offspec").coef("beta")),
        "main": solve_preset("main").bound.const,
    }
    want = {"period-a": F(-1, 12), "period-b": F(-1, 18), "onspec": (F(5, 24), F(1, 24)),
            "offspec": (F(1, 4), F(-1, 4)), "main": F(3, 14)}
    main = solve_preset("main")
    ok = got == want and main.exponent("beta") == F(1, 7)
    for theta in (F(0), F(7, 64), F(1, 5), F(49, 100)):
        c = conditional_exponents(theta)
        ok &= c.l2 == 1 / (8 - 8 * theta) and (c.period_t, c.period_beta) == (theta / 2, F(1, 4) - theta / 2)
    c = conditional_exponents(F(7, 64))
    assert report(capsys, 11, ok, f"-1/12, -1/18, 5/24 & 1/24, 1/4 & -1/4, 3/14 at beta=t^1/7; "
                                  f"theta=7/64: l2 {c.l2}, period ({c.period_t}, {c.period_beta})")


def test_c12_amplifier_inequalities(capsys):
    rng = np.random.default_rng(2024)
    worst1 = worst2 = 0.0
    ok = True
    for _ in range(100):
        alpha = rng.normal(size=1000) + 1j * rng.normal(size=1000)
        rep = amplifier_sum_checks(alpha)
        ok &= rep.holds
        worst1 = max(worst1, rep.lhs1 / (rep.const1 * rep.rhs1_base))
        worst2 = max(worst2, rep.lhs2 / (rep.const2 * rep.rhs2_base))
    assert report(capsys, 12, ok, f"100 vectors, N=1000; worst lhs/(const*rhs): {worst1:.3f} "
                                  f"(const H_N = {rep.const1:.4f}), {worst2:.3f} (const H_N max tau = "
                                  f"{rep.const2:.2f})")
