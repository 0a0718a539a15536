"""Exact arithmetic in a rational quaternion algebra (a, b / Q) and one of its orders.

Elements are stored in the basis 1, w, W, wW with w^2 = a, W^2 = b and
wW = -Ww.  Internally an element is viewed as xi + eta*W with xi, eta in
Q(sqrt a); this makes multiplication and the matrix embedding short.

Bulk work (enumerating R(m), deduplicating Hecke cosets) runs on integer
numpy arrays holding D * coordinates, where D clears the denominators of the
order basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded, ConfigInvalid, IncompleteEnumeration

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


DEFAULT_ENUM_BUDGET = 5 * 10**8


def _squarefree(n: int) -> bool:
    n = abs(n)
    if n == 0:
        return False
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        p += 1
    return True


def _prime_factors(n: int) -> list[int]:
    n = abs(n)
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _split_p(x: int, p: int) -> tuple[int, int]:
    k = 0
    while x % p == 0:
        x //= p
        k += 1
    return k, x


def hilbert_symbol(a: int, b: int, p) -> int:
    """Hilbert symbol (a, b)_p for nonzero integers; p is a prime or the string 'inf'."""
    if p == "inf":
        return -1 if (a < 0 and b < 0) else 1
    al, u = _split_p(a, p)
    be, v = _split_p(b, p)
    if p == 2:
        eps = lambda x: ((x - 1) // 2) % 2
        omg = lambda x: ((x * x - 1) // 8) % 2
        e = eps(u) * eps(v) + al * omg(v) + be * omg(u)
        return -1 if e % 2 else 1

    def leg(x):
        r = pow(x % p, (p - 1) // 2, p)
        return -1 if r == p - 1 else 1

    sign = (-1) ** ((al * be * ((p - 1) // 2)) % 2)
    return sign * (leg(u) ** be) * (leg(v) ** al)


@dataclass(frozen=True)
class AlgebraSpec:
    a: int
    b: int

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigInvalid(f"a must be positive, got {self.a}")
        if not (_squarefree(self.a) and _squarefree(self.b)):
            raise ConfigInvalid(f"a={self.a}, b={self.b} must be squarefree")
        if not self.ramified_places():
            raise ConfigInvalid(f"({self.a},{self.b}/Q) is split (not a division algebra)")

    def ramified_places(self) -> list:
        places = sorted(set([2] + _prime_factors(2 * self.a * self.b)))
        out = [p for p in places if hilbert_symbol(self.a, self.b, p) == -1]
        if hilbert_symbol(self.a, self.b, "inf") == -1:
            out.append("inf")
        return out

    def discriminant(self) -> int:
        return math.prod(p for p in self.ramified_places() if p != "inf")


def _q(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class QuatElement:
    """x0 + x1*w + x2*W + x3*wW with exact rational coordinates."""

    __slots__ = ("alg", "c")

    def __init__(self, alg: AlgebraSpec, coords):
        self.alg = alg
        self.c = tuple(_q(x) for x in coords)
        if len(self.c) != 4:
            raise ValueError("need four coordinates")

    @classmethod
    def one(cls, alg):
        return cls(alg, (1, 0, 0, 0))

    def _same(self, other):
        if self.alg != other.alg:
            raise ValueError("operands live in different algebras")

    def __add__(self, other):
        self._same(other)
        return QuatElement(self.alg, [x + y for x, y in zip(self.c, other.c)])

    def __sub__(self, other):
        self._same(other)
        return QuatElement(self.alg, [x - y for x, y in zip(self.c, other.c)])

    def __neg__(self):
        return QuatElement(self.alg, [-x for x in self.c])

    def scale(self, r) -> QuatElement:
        r = _q(r)
        return QuatElement(self.alg, [r * x for x in self.c])

    def __mul__(self, other):
        if not isinstance(other, QuatElement):
            return self.scale(other)
        self._same(other)
        return QuatElement(self.alg, _mul_coords(self.c, other.c, self.alg.a, self.alg.b))

    __rmul__ = scale

    def conj(self) -> QuatElement:
        x0, x1, x2, x3 = self.c
        return QuatElement(self.alg, (x0, -x1, -x2, -x3))

    def norm(self) -> Fraction:
        x0, x1, x2, x3 = self.c
        a, b = self.alg.a, self.alg.b
        return x0 * x0 - a * x1 * x1 - b * x2 * x2 + a * b * x3 * x3

    def trace(self) -> Fraction:
        return 2 * self.c[0]

    def __eq__(self, other):
        return isinstance(other, QuatElement) and self.alg == other.alg and self.c == other.c

    def __hash__(self):
        return hash((self.alg, self.c))

    def __repr__(self):
        return "QuatElement(" + ", ".join(str(x) for x in self.c) + ")"


def _mul_coords(x, y, a, b):
    # (xi1 + eta1 W)(xi2 + eta2 W) = (xi1 xi2 + b eta1 conj(eta2)) + (xi1 eta2 + eta1 conj(xi2)) W
    p1, q1, r1, s1 = x
    p2, q2, r2, s2 = y
    xi0 = p1 * p2 + a * q1 * q2 + b * (r1 * r2 - a * s1 * s2)
    xi1 = p1 * q2 + q1 * p2 + b * (s1 * r2 - r1 * s2)
    et0 = p1 * r2 + a * q1 * s2 + r1 * p2 - a * s1 * q2
    et1 = p1 * s2 + q1 * r2 + s1 * p2 - r1 * q2
    return (xi0, xi1, et0, et1)


def quat_mul_array(X: np.ndarray, Y: np.ndarray, a: int, b: int) -> np.ndarray:
    """Row-wise product of coordinate arrays (any numeric dtype, broadcastable)."""
    out = _mul_coords(np.moveaxis(X, -1, 0), np.moveaxis(Y, -1, 0), a, b)
    return np.stack(out, axis=-1)


def quat_conj_array(X: np.ndarray) -> np.ndarray:
    return X * np.array([1, -1, -1, -1], dtype=X.dtype)


def quat_arith(x: QuatElement, y: QuatElement | None, op: str):
    """Dispatch for the four basic operations: mul, conj, norm, trace."""
    if op == "mul":
        return x * y
    if op == "conj":
        return x.conj()
    if op == "norm":
        return x.norm()
    if op == "trace":
        return x.trace()
    raise ValueError(f"unknown op {op!r}")


def embed_matrix(x: QuatElement | np.ndarray, alg: AlgebraSpec | None = None) -> np.ndarray:
    """Real 2x2 image [[conj(xi), conj(eta)], [b*eta, xi]] with sqrt(a) > 0.

    Accepts a QuatElement or a float array of coordinates with shape (..., 4);
    the array form needs ``alg``.
    """
    if isinstance(x, QuatElement):
        alg = x.alg
        c = np.array([float(v) for v in x.c])
    else:
        c = np.asarray(x, dtype=float)
    r = math.sqrt(alg.a)
    xi = c[..., 0] + c[..., 1] * r
    xib = c[..., 0] - c[..., 1] * r
    eta = c[..., 2] + c[..., 3] * r
    etab = c[..., 2] - c[..., 3] * r
    top = np.stack([xib, etab], axis=-1)
    bot = np.stack([alg.b * eta, xi], axis=-1)
    return np.stack([top, bot], axis=-2)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _frac_inverse(M):
    n = len(M)
    A = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise ConfigInvalid("order basis is linearly dependent")
        A[col], A[piv] = A[piv], A[col]
        pv = A[col][col]
        A[col] = [v / pv for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [u - f * v for u, v in zip(A[r], A[col])]
    return [row[n:] for row in A]


def _frac_det(M):
    n = len(M)
    A = [list(map(Fraction, row)) for row in M]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        det *= A[col][col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            A[r] = [u - f * v for u, v in zip(A[r], A[col])]
    return det


class OrderBasis:
    """A lattice order R = Z e0 + ... + Z e3 in the algebra, with level q."""

    def __init__(self, alg: AlgebraSpec, basis, q: int, validate: bool = True):
        self.alg = alg
        self.basis = tuple(b if isinstance(b, QuatElement) else QuatElement(alg, b) for b in basis)
        if len(self.basis) != 4:
            raise ConfigInvalid("order basis needs four elements")
        self.q = int(q)
        if self.q <= 0:
            raise ConfigInvalid("q must be a positive integer")
        self._B = [list(e.c) for e in self.basis]
        self._Binv = _frac_inverse(self._B)
        self.denom = reduce(_lcm, (x.denominator for row in self._B for x in row), 1)
        if validate:
            self.validate()

    def coords_in_basis(self, x: QuatElement) -> list[Fraction]:
        return [sum(x.c[i] * self._Binv[i][j] for i in range(4)) for j in range(4)]

    def contains(self, x: QuatElement) -> bool:
        return all(v.denominator == 1 for v in self.coords_in_basis(x))

    def validate(self) -> None:
        one = QuatElement.one(self.alg)
        if not self.contains(one):
            raise ConfigInvalid("1 is not in the order")
        for e in self.basis:
            if e.norm().denominator != 1 or e.trace().denominator != 1:
                raise ConfigInvalid(f"basis element {e} is not integral")
            for f in self.basis:
                if not self.contains(e * f):
                    raise ConfigInvalid(f"order not closed: {e} * {f}")

    def reduced_discriminant(self) -> int:
        G = [[(e * f.conj()).trace() for f in self.basis] for e in self.basis]
        d2 = abs(_frac_det(G))
        d = math.isqrt(int(d2))
        if d * d != d2:
            raise ConfigInvalid("Gram determinant is not a square")
        return d

    def is_maximal(self) -> bool:
        return self.reduced_discriminant() == self.alg.discriminant()

    def membership_matrix(self, scale: int) -> tuple[np.ndarray, int]:
        """Integer matrix M and modulus L with: Y/scale in R  iff  Y @ M = 0 mod L."""
        Z = [[v / scale for v in row] for row in self._Binv]
        L = reduce(_lcm, (v.denominator for row in Z for v in row), 1)
        M = np.array([[int(v * L) for v in row] for row in Z], dtype=np.int64)
        return M, L

    def contains_array(self, Y: np.ndarray, scale: int, m: int = 1) -> np.ndarray:
        """Vectorised test of Y/scale in m*R for integer rows Y."""
        M, L = self.membership_matrix(scale)
        return np.all((np.asarray(Y, dtype=np.int64) @ M) % (L * m) == 0, axis=-1)

    def to_elements(self, Y: np.ndarray, scale: int) -> list[QuatElement]:
        return [QuatElement(self.alg, [Fraction(int(v), scale) for v in row]) for row in Y]

    # config I/O
    @classmethod
    def from_config(cls, cfg: dict) -> OrderBasis:
        try:
            alg = AlgebraSpec(int(cfg["algebra"]["a"]), int(cfg["algebra"]["b"]))
            rows = cfg["order"]["basis"]
            q = int(cfg["order"]["q"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad order config: {exc}") from exc
        try:
            basis = [[Fraction(str(v)) for v in row] for row in rows]
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"bad rational in order basis: {exc}") from exc
        if len(basis) != 4 or any(len(r) != 4 for r in basis):
            raise ConfigInvalid("order basis must be 4 rows of 4 rationals")
        return cls(alg, basis, q)

    @classmethod
    def from_toml(cls, path) -> OrderBasis:
        with open(path, "rb") as fh:
            return cls.from_config(tomllib.load(fh))

    def to_config(self) -> dict:
        return {
            "algebra": {"a": self.alg.a, "b": self.alg.b},
            "order": {"basis": [[str(v) for v in e.c] for e in self.basis], "q": self.q},
        }


def default_order() -> OrderBasis:
    ref = resources.files("geodesic_amp_lab") / "data" / "order_default.toml"
    with resources.as_file(ref) as p:
        return OrderBasis.from_toml(Path(p))


def sigma1(m: int) -> int:
    return sum(d for d in range(1, m + 1) if m % d == 0)


def _coefficient_box(alg: AlgebraSpec, E: float) -> tuple[float, float, float, float]:
    # entries of phi: xi, conj(xi), eta, conj(eta)*b all bounded by E
    ra = math.sqrt(alg.a)
    ab = abs(alg.b)
    eta_max = E * (1.0 + 1.0 / ab) / 2.0
    return E, E / ra, eta_max, eta_max / ra


def enumerate_norm_array(R: OrderBasis, m: int, entry_bound: float,
                         budget: int = DEFAULT_ENUM_BUDGET) -> tuple[np.ndarray, int]:
    """All alpha in R with N(alpha) = m and entries of phi(alpha)/sqrt(m) <= entry_bound.

    Returns (Y, D): integer rows Y with alpha = Y / D in the basis 1, w, W, wW.
    The search splits N = N(xi) - b N(eta) and matches the two halves on a
    (1/D)Z^4 super-lattice, then filters by order membership.
    """
    if m < 1 or entry_bound <= 0:
        raise ValueError("need m >= 1 and entry_bound > 0")
    a, b = R.alg.a, R.alg.b
    D = R.denom
    E = entry_bound * math.sqrt(m) * (1 + 1e-9)
    bx = [int(math.floor(D * v + 1e-9)) for v in _coefficient_box(R.alg, E)]
    n01 = (2 * bx[0] + 1) * (2 * bx[1] + 1)
    n23 = (2 * bx[2] + 1) * (2 * bx[3] + 1)
    if n01 + n23 > budget:
        raise BudgetExceeded(f"coefficient box {n01}+{n23} exceeds budget {budget}")

    def pairs(u, v):
        g0, g1 = np.meshgrid(np.arange(-u, u + 1, dtype=np.int64),
                             np.arange(-v, v + 1, dtype=np.int64), indexing="ij")
        return g0.ravel(), g1.ravel()

    y0, y1 = pairs(bx[0], bx[1])
    y2, y3 = pairs(bx[2], bx[3])
    Nxi = y0 * y0 - a * y1 * y1
    Neta = y2 * y2 - a * y3 * y3
    target = D * D * m
    # Nxi - b*Neta = target  =>  Neta = (Nxi - target)/b
    num = Nxi - target
    ok = num % b == 0
    need = num[ok] // b
    i01 = np.nonzero(ok)[0]
    order = np.argsort(Neta, kind="stable")
    Ns = Neta[order]
    lo = np.searchsorted(Ns, need, side="left")
    hi = np.searchsorted(Ns, need, side="right")
    cnt = hi - lo
    if cnt.sum() > budget:
        raise BudgetExceeded("too many norm-equation matches")
    left = np.repeat(i01, cnt)
    starts = np.repeat(lo, cnt)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    right = order[starts + offs]
    Y = np.stack([y0[left], y1[left], y2[right], y3[right]], axis=1)
    if len(Y) == 0:
        return Y.reshape(0, 4), D
    Y = Y[R.contains_array(Y, D)]
    mats = embed_matrix(Y.astype(float) / D, R.alg) / math.sqrt(m)
    keep = np.all(np.abs(mats) <= entry_bound * (1 + 1e-12), axis=(-1, -2))
    Y = Y[keep]
    # deterministic order: by entry size, then lexicographic
    size = np.max(np.abs(mats[keep]), axis=(-1, -2))
    idx = np.lexsort(tuple(-Y[:, k] for k in range(3, -1, -1)) + (np.round(size, 12),))
    return Y[idx], D


def enumerate_norm(R: OrderBasis, m: int, entry_bound: float,
                   budget: int = DEFAULT_ENUM_BUDGET) -> list[QuatElement]:
    Y, D = enumerate_norm_array(R, m, entry_bound, budget)
    return R.to_elements(Y, D)


def left_equivalent(R: OrderBasis, x: QuatElement, y: QuatElement, m: int) -> bool:
    """R(1)x == R(1)y for x, y of norm m, tested as x*conj(y) in mR."""
    prod = x * y.conj()
    return all((v / m).denominator == 1 for v in R.coords_in_basis(prod))


def dedupe_cosets(R: OrderBasis, Y: np.ndarray, D: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Greedy left-coset partition of the rows of Y (elements Y/D of norm m).

    Returns (rep_rows, labels) with labels[i] = index of the rep of row i.
    """
    a, b = R.alg.a, R.alg.b
    labels = -np.ones(len(Y), dtype=np.int64)
    reps = []
    for i in range(len(Y)):
        if labels[i] >= 0:
            continue
        k = len(reps)
        reps.append(i)
        rest = np.nonzero(labels < 0)[0]
        prod = quat_mul_array(Y[rest], quat_conj_array(Y[i])[None, :], a, b)
        same = R.contains_array(prod, D * D, m)
        labels[rest[same]] = k
    return Y[reps], labels


@dataclass
class HeckeSet:
    m: int
    reps: list
    entry_bound: float = float("nan")

    def __len__(self):
        return len(self.reps)


def coset_reps(R: OrderBasis, m: int, bounds=(2.0, 3.0, 4.0, 6.0, 8.0, 12.0),
               budget: int = DEFAULT_ENUM_BUDGET) -> HeckeSet:
    """Representatives of R(1)\\R(m), certified complete by the count sigma_1(m)."""
    if math.gcd(m, R.q) != 1:
        raise ValueError(f"m={m} is not coprime to the level q={R.q}")
    want = sigma1(m)
    found = 0
    for B in bounds:
        Y, D = enumerate_norm_array(R, m, B, budget)
        reps, _ = dedupe_cosets(R, Y, D, m)
        found = len(reps)
        if found == want:
            return HeckeSet(m, R.to_elements(reps, D), B)
        if found > want:
            raise IncompleteEnumeration(
                f"found {found} > sigma_1({m}) = {want} classes; order or level inconsistent")
    raise IncompleteEnumeration(f"only {found} of {want} cosets for m={m} within bound {bounds[-1]}")


def composition_multiset(R: OrderBasis, p: int) -> dict:
    """Coset bookkeeping for T_p T_p = T_{p^2} + p Id.

    Every product alpha_j * alpha_i of T_p reps is assigned to a coset of
    R(p^2) (or to R(1)*p).  Returns the multiplicity of every coset of R(p^2).
    """
    a, b = R.alg.a, R.alg.b
    Hp = coset_reps(R, p)
    Hp2 = coset_reps(R, p * p)
    D = R.denom
    P = np.array([[int(v * D) for v in e.c] for e in Hp.reps], dtype=np.int64)
    Q2 = np.array([[int(v * D) for v in e.c] for e in Hp2.reps], dtype=np.int64)
    prods = quat_mul_array(P[:, None, :], P[None, :, :], a, b).reshape(-1, 4)  # scale D^2
    m = p * p
    counts = np.zeros(len(Q2), dtype=np.int64)
    unmatched = 0
    for row in prods:
        eq = R.contains_array(quat_mul_array(Q2, quat_conj_array(row)[None, :], a, b), D ** 3, m)
        hits = np.nonzero(eq)[0]
        if len(hits) != 1:
            unmatched += 1
        else:
            counts[hits[0]] += 1
    scalar = np.array([p * D, 0, 0, 0], dtype=np.int64)
    is_scalar = R.contains_array(
        quat_mul_array(Q2, quat_conj_array(scalar * D)[None, :], a, b), D ** 3, m)
    return {
        "p": p,
        "products": len(prods),
        "reps_p2": len(Q2),
        "counts": counts,
        "scalar_index": int(np.nonzero(is_scalar)[0][0]) if is_scalar.any() else -1,
        "unmatched": unmatched,
    }
