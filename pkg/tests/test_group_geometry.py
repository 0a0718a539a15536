import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from geodesic_amp_lab.errors import OutOfChart
from geodesic_amp_lab.group_geometry import (
    A_derivative, A_height, GeodesicSegment, GroupElement, LieVector, K_angle, N_coord,
    a_mat, angle_map_sigma, dist_geodesics, dist_group, hyp_dist, inv_mat, iwasawa,
    k_mat, lie_exp, mixed_flow_derivative, mobius, n_align, n_align_element, n_mat, sl2_log,
)


def random_sl2(rng, n=None, scale=1.0):
    X = rng.normal(scale=scale, size=(n, 2, 2) if n else (2, 2))
    det = np.linalg.det(X)
    X[..., 1, :] *= np.sign(det)[..., None] if n else np.sign(det)
    return X / np.sqrt(np.abs(det))[..., None, None] if n else X / math.sqrt(abs(det))


def near_identity(rng, scale):
    X = rng.normal(scale=scale, size=(2, 2))
    X[1, 1] = -X[0, 0]
    return lie_exp(X)


def rq_sigma(g):
    # independent oracle: upper-triangular times orthogonal, signs normalised
    U, Q = scipy.linalg.rq(g)
    S = np.diag(np.sign(np.diag(U)))
    U, Q = U @ S, S @ Q
    if np.linalg.det(Q) < 0:
        raise AssertionError("reflection")
    return (2 * math.atan2(Q[0, 1], Q[0, 0])) % (2 * math.pi), U


def test_iwasawa_trivial():
    c = iwasawa(GroupElement.a(0.7))
    assert abs(c.x) < 1e-15 and abs(c.y - 0.7) < 1e-15 and c.theta == 0
    c = iwasawa(GroupElement.k(1.1))
    assert abs(c.y) < 1e-15 and abs(c.x) < 1e-15
    assert abs(c.theta - 1.1) < 1e-14


def test_iwasawa_roundtrip_bulk():
    rng = np.random.default_rng(0)
    G = random_sl2(rng, 10_000)
    M = n_mat(N_coord(G)) @ a_mat(A_height(G)) @ k_mat(K_angle(G))
    # PSL: equal up to sign
    err = np.minimum(np.abs(M - G).max(axis=(1, 2)), np.abs(M + G).max(axis=(1, 2)))
    scale = np.abs(G).max(axis=(1, 2))
    assert np.max(err / scale) < 1e-12


def test_group_element_sign_and_det():
    g = GroupElement(-np.eye(2))
    assert np.array_equal(g.m, np.eye(2))
    with pytest.raises(ValueError):
        GroupElement([[2, 0], [0, 1]])


def test_sigma_examples():
    assert abs(angle_map_sigma(GroupElement.identity(), 0.4) - 0.4) < 1e-15
    assert abs(angle_map_sigma(GroupElement.a(0.8), math.pi) - math.pi) < 1e-14
    s = angle_map_sigma(GroupElement.a(1.0), math.pi / 2)
    oracle, _ = rq_sigma(k_mat(math.pi / 2) @ a_mat(1.0))
    assert abs(s - oracle) < 1e-13
    assert abs(s - 2 * math.atan(math.e)) < 1e-13  # 2 arccot(e^-1)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 6.27))
def test_sigma_relation_for_a(y, th):
    s = float(angle_map_sigma(a_mat(y), th))
    assert abs(math.exp(-y) / math.tan(th / 2) - 1 / math.tan(s / 2)) < 1e-8 * (1 + abs(1 / math.tan(th / 2)))


def test_sigma_monotone_and_rq_oracle():
    rng = np.random.default_rng(3)
    th = np.linspace(0, 2 * np.pi, 2001)[:-1]
    for y in (-2.0, 0.3, 2.5):
        s = np.unwrap(angle_map_sigma(a_mat(y), th))
        assert np.all(np.diff(s) > 0)
    for _ in range(50):
        g = random_sl2(rng)
        t = rng.uniform(0, 2 * np.pi)
        oracle, _ = rq_sigma(k_mat(t) @ g)
        d = (float(angle_map_sigma(g, t)) - oracle) % (2 * np.pi)
        assert min(d, 2 * np.pi - d) < 1e-10


def test_A_derivative():
    assert abs(A_derivative(GroupElement.identity()) - 1) < 1e-15
    assert abs(A_derivative(GroupElement.k(math.pi / 2))) < 1e-15
    rng = np.random.default_rng(4)
    for _ in range(100):
        g = random_sl2(rng)
        h = 1e-5
        fd = (A_height(g @ a_mat(h)) - A_height(g @ a_mat(-h))) / (2 * h)
        assert abs(fd - A_derivative(g)) < 1e-8


def test_unit_speed():
    rng = np.random.default_rng(5)
    for _ in range(50):
        seg = GeodesicSegment(GroupElement(random_sl2(rng)), 2.0)
        x, xp = rng.uniform(0, 2, 2)
        assert abs(hyp_dist(seg.point(x), seg.point(xp)) - abs(x - xp)) < 1e-10


def brute_segment_distance(l1, l2):
    xs = np.linspace(0, l1.length, 200)
    ys = np.linspace(0, l2.length, 200)
    P = l1.point(xs)[:, None]
    Q = l2.point(ys)[None, :]
    D = hyp_dist(P, Q)
    i, j = np.unravel_index(np.argmin(D), D.shape)
    f = lambda v: float(hyp_dist(l1.point(np.clip(v[0], 0, l1.length)), l2.point(np.clip(v[1], 0, l2.length))))
    r = minimize(f, [xs[i], ys[j]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return min(float(D[i, j]), r.fun)


def test_dist_geodesics_examples():
    l = GeodesicSegment(GroupElement.identity())
    assert dist_geodesics(l, l) == 0.0
    for x0 in (0.3, 1.0, 2.5):
        l2 = l.translate(n_mat(x0))
        # the top endpoints are closest: i e and i e + x0
        expect = float(hyp_dist(1j * math.e, 1j * math.e + x0))
        assert abs(dist_geodesics(l, l2) - expect) < 1e-9
        assert abs(dist_geodesics(l, l2) - brute_segment_distance(l, l2)) < 1e-7


def test_dist_geodesics_random_vs_grid():
    rng = np.random.default_rng(6)
    for _ in range(15):
        l1 = GeodesicSegment(GroupElement(random_sl2(rng, scale=0.6)), rng.uniform(0.3, 1.5))
        l2 = GeodesicSegment(GroupElement(random_sl2(rng, scale=0.6)), rng.uniform(0.3, 1.5))
        d = dist_geodesics(l1, l2)
        assert d <= brute_segment_distance(l1, l2) + 1e-9
        assert d >= brute_segment_distance(l1, l2) - 1e-7
        assert d <= float(hyp_dist(l1.point(0.0), l2.point(0.0))) + 1e-12


def test_n_align_trivial_and_shift():
    rng = np.random.default_rng(7)
    for _ in range(10):
        g = GroupElement(random_sl2(rng))
        l = GeodesicSegment(g)
        assert n_align(l, l) < 1e-12
        assert n_align(l, GeodesicSegment(g @ GroupElement.a(rng.uniform(-2, 2)))) < 1e-9


def golden(f, lo, hi, tol=1e-13):
    r = (math.sqrt(5) - 1) / 2
    c, d = hi - r * (hi - lo), lo + r * (hi - lo)
    while hi - lo > tol:
        if f(c) < f(d):
            hi, d = d, c
            c = hi - r * (hi - lo)
        else:
            lo, c = c, d
            d = lo + r * (hi - lo)
    return (lo + hi) / 2


def test_n_align_small_transverse():
    X = LieVector(0.0, 1.0, -0.5)
    for eps in (1e-2, 1e-3, 1e-4):
        m = (X.scale(eps)).exp().m
        val, tstar = n_align_element(m)
        t_gold = golden(lambda t: float(np.linalg.norm(sl2_log(a_mat(-t) @ m)[[0, 0, 1], [0, 1, 0]])), -1, 1)
        ref = float(np.sqrt(np.sum(sl2_log(a_mat(-t_gold) @ m)[[0, 0, 1], [0, 1, 0]] ** 2)))
        assert abs(val - ref) < 1e-12 + 1e-9 * ref
        assert abs(val / (eps * X.norm()) - 1) < 5 * eps


def test_n_align_left_invariance():
    rng = np.random.default_rng(8)
    for _ in range(20):
        l1 = GeodesicSegment(GroupElement(random_sl2(rng, scale=0.5)))
        l2 = GeodesicSegment(GroupElement(random_sl2(rng, scale=0.5)))
        h = random_sl2(rng)
        assert abs(n_align(l1.translate(h), l2.translate(h)) - n_align(l1, l2)) < 1e-9


def test_n_align_orientation():
    l = GeodesicSegment(GroupElement.identity())
    flipped = l.translate(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert n_align(l, flipped) > 1.0


def test_dist_group():
    rng = np.random.default_rng(9)
    for _ in range(30):
        g = GroupElement(random_sl2(rng))
        assert dist_group(g, g) < 1e-15
        v = rng.normal(size=3)
        X = LieVector(*(1e-3 * v / np.linalg.norm(v)))
        d = dist_group(g, g @ X.exp())
        assert abs(d - X.norm()) < 1e-6
        h = GroupElement(random_sl2(rng))
        g1, g2 = (GroupElement(near_identity(rng, 0.5)) for _ in range(2))
        assert abs(dist_group(h @ g1, h @ g2) - dist_group(g1, g2)) < 1e-9
    with pytest.raises(OutOfChart):
        dist_group(GroupElement.identity(), GroupElement.a(25.0))


def test_log_exp_roundtrip():
    rng = np.random.default_rng(10)
    X = rng.normal(scale=0.5, size=(500, 2, 2))
    X[:, 1, 1] = -X[:, 0, 0]
    assert np.max(np.abs(sl2_log(lie_exp(X)) - X)) < 1e-12
    # near-parabolic
    Y = np.array([[1e-7, 0.3], [0.0, -1e-7]])
    assert np.max(np.abs(sl2_log(lie_exp(Y)) - Y)) < 1e-14


@pytest.mark.parametrize("y", [-2.0, -1.0, 0.0, 0.5, 2.0])
def test_mixed_flow_derivative(y):
    assert abs(mixed_flow_derivative(y) / math.exp(y) - 1) < 1e-5
    assert abs(mixed_flow_derivative(y, right_n=False) - 1) < 1e-5


def test_mobius_and_endpoints():
    g = GroupElement(np.array([[2.0, 1.0], [1.0, 1.0]]))
    s, e = GeodesicSegment(g).endpoints()
    assert abs(s - 1.0) < 1e-15 and abs(e - 2.0) < 1e-15
    assert abs(mobius(inv_mat(g.m), mobius(g.m, 0.3 + 2j)) - (0.3 + 2j)) < 1e-14
