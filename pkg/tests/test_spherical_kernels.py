import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import conical_legendre, conical_legendre_hyp
from geodesic_amp_lab.group_geometry import A_height, a_mat, k_mat, n_mat
from geodesic_amp_lab.spherical_kernels import (
    A_rot_a, SpectralWindow, asymptotic_decompose, forward_hc_transform, kernel_support_mass,
    plane_wave_two_point, pt_fourier, spherical_phi, spherical_phi_many, synthesize_kernel,
    synthesize_profile, two_sided_window,
)


def test_closed_form_height_matches_group():
    th = np.linspace(0, 2 * np.pi, 37)
    for r in (0.0, 0.5, 3.0):
        assert np.allclose(A_rot_a(th, r), A_height(k_mat(th) @ a_mat(r)), atol=1e-13)


def test_phi_at_origin():
    for s in (0.0, 5.0, 50.0, 3 + 2j):
        assert abs(spherical_phi(s, 0.0) - 1) < 1e-12
    # r tiny but nonzero goes through the quadrature
    assert abs(spherical_phi(20.0, 1e-14) - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 60), st.floats(0.01, 4))
def test_phi_real_for_real_s(s, r):
    assert abs(spherical_phi(s, r).imag) < 1e-13


def test_phi10_at_1_against_legendre():
    v = spherical_phi(10.0, 1.0).real
    assert abs(v - conical_legendre(10.0, 1.0)) < 1e-12
    assert abs(v - conical_legendre_hyp(10.0, 1.0)) < 1e-12


@pytest.mark.parametrize("s", [5.0, 20.0, 50.0])
def test_phi_grid_against_legendre(s):
    for r in np.linspace(0.1, 3.0, 7):
        assert abs(spherical_phi(s, r).real - conical_legendre(s, r)) < 1e-8


def test_phi_many_consistent():
    s = np.array([3.0, 17.5, 60.0])
    many = spherical_phi_many(s, 1.3)
    single = np.array([spherical_phi(v, 1.3).real for v in s])
    assert np.max(np.abs(many - single)) < 1e-12


def test_two_point_plane_wave_matches_radial():
    # phi_s(z, w) depends only on d(z, w)
    z = n_mat(0.3) @ a_mat(0.4)
    w = n_mat(-0.2) @ a_mat(-0.1) @ k_mat(0.7)
    from geodesic_amp_lab.group_geometry import hyp_dist, mobius
    d = float(hyp_dist(mobius(z, 1j), mobius(w, 1j)))
    for s in (4.0, 15.0):
        assert abs(plane_wave_two_point(s, z, w) - spherical_phi(s, d)) < 1e-10


def test_window_properties():
    w = two_sided_window(200.0)
    s = np.linspace(-1, 1, 2001)
    assert np.min(w.h(s)) >= 1 - 1e-14
    assert w.ht(w.t) >= 1
    x = np.linspace(-600, 600, 4801)
    assert np.array_equal(w.ht(x), w.ht(-x))
    assert np.all(w.ht(np.linspace(w.t - 1, w.t + 1, 101)) >= 1 - 1e-14)
    far = np.concatenate([np.linspace(0, w.t / 2 - 1e-9, 2000), np.linspace(1.5 * w.t + 1e-9, 1500, 4000)])
    assert np.max(w.ht(far)) < 1e-10 * w.ht(w.t)
    assert w.fourier_support(2) < 1.0
    with pytest.raises(ValueError):
        two_sided_window(5.0)


def test_kernel_real_even_and_supported():
    w = two_sided_window(100.0)
    xs = np.array([0.0, 0.2, 0.7])
    assert np.allclose(synthesize_kernel(w, 2, xs), synthesize_kernel(w, 2, -xs), rtol=0, atol=1e-12)
    k0 = synthesize_kernel(w, 2, 0.0)
    assert abs(synthesize_kernel(w, 2, 1.5)) / abs(k0) < 1e-6


def test_kernel_step_refinement():
    w = two_sided_window(100.0)
    xs = np.array([0.0, 0.05, 0.3, 0.8])
    a = synthesize_kernel(w, 2, xs, ds=0.5)
    b = synthesize_kernel(w, 2, xs, ds=0.25)
    assert np.max(np.abs(a - b)) < 1e-9 * abs(a[0])


def test_pt_bound_shape():
    sups = []
    for t in (100.0, 200.0, 400.0):
        prof = synthesize_profile(two_sided_window(t), 2, np.linspace(0, 2, 201))
        sups.append(prof.normalized().max())
        assert kernel_support_mass(prof) < 1e-6
    assert max(sups) / min(sups) < 2


def test_plancherel_power_two():
    w = two_sided_window(40.0)
    s = np.linspace(25, 55, 13)
    H = forward_hc_transform(lambda r: synthesize_kernel(w, 2, r), s, R=1.0, nodes=120)
    assert np.max(np.abs(H - w.ht(s) ** 2)) < 1e-6 * np.max(w.ht(s) ** 2)


def test_asymptotic_decomposition():
    fits = [asymptotic_decompose(win, [1.0]) for win in
            ([45, 50, 55, 60], [90, 100, 110, 120], [190, 200, 210, 220])]
    mags = [abs(f.c1[0]) for f in fits]
    for f in fits:
        assert abs(abs(f.c1[0]) - abs(f.c2[0])) < 1e-12
        assert f.scaled_residual().max() < 0.05
    assert (max(mags) - min(mags)) / max(mags) < 1e-3


def test_frequency_localization_trend():
    w = SpectralWindow(100.0, eps=0.06, M=4)
    lam = np.linspace(0, 100, 201)
    F = np.abs(pt_fourier(w, lam))
    betas = np.array([32.0, 64.0, 128.0])
    sups = np.array([F[np.abs(lam - w.t) >= b / 2].max() for b in betas])
    assert np.all(np.diff(sups) < 0)
    slope = np.polyfit(np.log(betas), np.log(sups), 1)[0]
    assert -0.8 < slope < -0.25
    # above the band the transform vanishes
    assert np.max(np.abs(pt_fourier(w, [w.t + 120.0, w.t + 200.0]))) < 1e-8 * F.max()
