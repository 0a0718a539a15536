import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geodesic_amp_lab.errors import BudgetExceeded, ConfigInvalid
from geodesic_amp_lab.quaternion_orders import (
    AlgebraSpec, OrderBasis, QuatElement, coset_reps, composition_multiset, default_order,
    embed_matrix, enumerate_norm, hilbert_symbol, left_equivalent, quat_arith, sigma1,
)

# Hand-written structure constants for the basis (1, w, W, wW):
# TABLE[i][j] = (coefficient-as-function-of-(a,b), index) of e_i * e_j.
TABLE = {
    (0, 0): (lambda a, b: 1, 0), (0, 1): (lambda a, b: 1, 1),
    (0, 2): (lambda a, b: 1, 2), (0, 3): (lambda a, b: 1, 3),
    (1, 0): (lambda a, b: 1, 1), (1, 1): (lambda a, b: a, 0),
    (1, 2): (lambda a, b: 1, 3), (1, 3): (lambda a, b: a, 2),
    (2, 0): (lambda a, b: 1, 2), (2, 1): (lambda a, b: -1, 3),
    (2, 2): (lambda a, b: b, 0), (2, 3): (lambda a, b: -b, 1),
    (3, 0): (lambda a, b: 1, 3), (3, 1): (lambda a, b: -a, 2),
    (3, 2): (lambda a, b: b, 1), (3, 3): (lambda a, b: -a * b, 0),
}


def oracle_mul(x, y, a, b):
    out = [Fraction(0)] * 4
    for i in range(4):
        for j in range(4):
            f, k = TABLE[(i, j)]
            out[k] += f(a, b) * Fraction(x[i]) * Fraction(y[j])
    return out


ALG = AlgebraSpec(3, -1)
R = default_order()
small = st.integers(min_value=-6, max_value=6)
quat = st.tuples(small, small, small, small).map(lambda t: QuatElement(ALG, [Fraction(v, 2) for v in t]))


def test_identity_norm_trace():
    one = QuatElement.one(ALG)
    assert one.norm() == 1 and one.trace() == 2


def test_omega_relations():
    w = QuatElement(ALG, (0, 1, 0, 0))
    W = QuatElement(ALG, (0, 0, 1, 0))
    assert w.norm() == -ALG.a
    assert w * W == -(W * w)
    assert w * w == QuatElement(ALG, (ALG.a, 0, 0, 0))
    assert W * W == QuatElement(ALG, (ALG.b, 0, 0, 0))


def test_norm_against_structure_constant_oracle():
    alg = AlgebraSpec(2, -11)
    x = QuatElement(alg, (3, 1, 2, 0))
    prod = oracle_mul(x.c, x.conj().c, 2, -11)
    assert prod[1:] == [0, 0, 0]
    assert x.norm() == prod[0] == 51
    assert quat_arith(x, None, "norm") == 51


@settings(max_examples=300, deadline=None)
@given(quat, quat)
def test_mul_matches_oracle_and_norm_multiplicative(x, y):
    assert list((x * y).c) == oracle_mul(x.c, y.c, ALG.a, ALG.b)
    assert (x * y).norm() == x.norm() * y.norm()
    assert (x * y).conj() == y.conj() * x.conj()


def test_norm_multiplicative_bulk():
    rng = np.random.default_rng(0)
    for _ in range(10_000 // 50):
        X = rng.integers(-9, 10, size=(50, 4))
        Y = rng.integers(-9, 10, size=(50, 4))
        for u, v in zip(X, Y):
            x, y = QuatElement(ALG, u.tolist()), QuatElement(ALG, v.tolist())
            assert (x * y).norm() == x.norm() * y.norm()


def test_hilbert_symbols():
    assert ALG.ramified_places() == [2, 3]
    assert AlgebraSpec(2, -11).ramified_places() == [2, 11] or AlgebraSpec(2, -11).ramified_places() == [11, 2]
    assert hilbert_symbol(-1, -1, "inf") == -1
    assert hilbert_symbol(-1, -1, 2) == -1
    with pytest.raises(ConfigInvalid):
        AlgebraSpec(1, 5)  # split
    with pytest.raises(ConfigInvalid):
        AlgebraSpec(4, -1)  # not squarefree


def test_embedding_identity_and_omega():
    assert np.allclose(embed_matrix(QuatElement.one(ALG)), np.eye(2))
    r = math.sqrt(ALG.a)
    assert np.allclose(embed_matrix(QuatElement(ALG, (0, 1, 0, 0))), np.diag([-r, r]))


@settings(max_examples=200, deadline=None)
@given(quat, quat)
def test_embedding_multiplicative(x, y):
    lhs = embed_matrix(x * y)
    rhs = embed_matrix(x) @ embed_matrix(y)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_det_equals_norm_on_order_elements():
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = rng.integers(-20, 21, size=4)
        x = sum((e.scale(int(k)) for e, k in zip(R.basis, c)), QuatElement(ALG, (0, 0, 0, 0)))
        n = float(x.norm())
        if n == 0:
            continue
        assert abs(np.linalg.det(embed_matrix(x)) - n) <= 1e-12 * max(1.0, abs(n)) * 10


def test_order_validation():
    assert R.q == 6
    assert R.reduced_discriminant() == 6
    assert R.is_maximal()
    for e in R.basis:
        for f in R.basis:
            assert R.contains(e * f)
    bad = R.to_config()
    bad["order"]["basis"][3] = ["1/3", "0", "0", "0"]
    with pytest.raises(ConfigInvalid):
        OrderBasis.from_config(bad)
    assert OrderBasis.from_config(R.to_config()).basis == R.basis


def test_enumerate_contains_one_and_exact_norms():
    els = enumerate_norm(R, 1, 2.0)
    assert QuatElement.one(ALG) in els
    for m in (1, 5, 7, 12):
        for x in enumerate_norm(R, m, 2.0):
            assert x.norm() == m
            assert R.contains(x)


def test_enumerate_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_norm(R, 10**6, 10.0, budget=1000)


@pytest.mark.parametrize("p", [5, 7, 11])
def test_prime_cosets_stabilize(p):
    counts = []
    for B in (2.0, 3.0, 4.0):
        els = enumerate_norm(R, p, B)
        reps = []
        for x in els:
            if not any(left_equivalent(R, x, r, p) for r in reps):
                reps.append(x)
        counts.append(len(reps))
    assert counts == [p + 1] * 3


def test_left_equivalence_is_equivalence():
    m = 5
    els = enumerate_norm(R, m, 2.0)[:40]
    rel = [[left_equivalent(R, x, y, m) for y in els] for x in els]
    n = len(els)
    for i in range(n):
        assert rel[i][i]
        for j in range(n):
            assert rel[i][j] == rel[j][i]
            if rel[i][j]:
                for k in range(n):
                    if rel[j][k]:
                        assert rel[i][k]


def test_coset_reps_small():
    assert coset_reps(R, 1).reps == [QuatElement.one(ALG)]
    H = coset_reps(R, 5)
    assert len(H) == 6
    for i, x in enumerate(H.reps):
        assert x.norm() == 5
        for y in H.reps[i + 1:]:
            assert not left_equivalent(R, x, y, 5)


def test_degree_identity_all_m_le_50():
    for m in range(1, 51):
        if math.gcd(m, R.q) == 1:
            assert len(coset_reps(R, m)) == sigma1(m)


def test_coset_reps_rejects_level():
    with pytest.raises(ValueError):
        coset_reps(R, 2)


def test_composition_identity_p5():
    res = composition_multiset(R, 5)
    assert res["unmatched"] == 0
    counts = res["counts"]
    assert counts[res["scalar_index"]] == 6
    others = np.delete(counts, res["scalar_index"])
    assert np.all(others == 1)
    assert counts.sum() == 36
