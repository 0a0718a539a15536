"""Counting Hecke returns of a geodesic segment.

M(l, n, kappa) counts gamma in R(n) whose image moves the unit segment l by
at most 1 and keeps it kappa-aligned with itself.  gamma acts through
phi(gamma)/sqrt(n) in SL2(R); gamma and -gamma are both counted.

Pipeline per n: enumerate R(n) in an entry box derived from the working
region, cut to the Frobenius ball, apply the norm-equation prefilter,
then run the exact geometric tests.  With ``check=True`` the geometric
tests also run on everything the prefilter rejected, so its soundness is
measured rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, ConfigInvalid
from .group_geometry import (
    GeodesicSegment, GroupElement, _dist_to_vertical_segment, _log_factor, a_mat, golden_section,
    hyp_dist, inv_mat, k_mat, mobius,
)
from .quaternion_orders import DEFAULT_ENUM_BUDGET, OrderBasis, embed_matrix, enumerate_norm_array

WORKING_RADIUS = 2.0  # compact region: hyperbolic disc of diameter 4 about i
C_BOX = math.sqrt(2.0 * math.cosh(2 * WORKING_RADIUS + 1.0))
PREFILTER_CONST = 8.0
ALIGN_GRID = 48
KAPPA_GRID = (0.01, 0.05, 0.2, 1.0)


# --- the geodesic's quadratic form -------------------------------------------

@dataclass(frozen=True)
class GeodesicForm:
    """alpha z^2 + beta z + gamma vanishing at the endpoints, beta^2 - 4 alpha gamma = 1."""

    alpha: float
    beta: float
    gamma: float

    @property
    def discriminant(self) -> float:
        return self.beta ** 2 - 4 * self.alpha * self.gamma

    def __call__(self, z):
        return self.alpha * z * z + self.beta * z + self.gamma

    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.beta / 2], [self.beta / 2, self.gamma]])

    def transform(self, g) -> GeodesicForm:
        """Form whose roots are g applied to the roots of self."""
        m = g.m if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
        gi = inv_mat(m)
        Q = gi.T @ self.matrix() @ gi
        return GeodesicForm(float(Q[0, 0]), float(Q[0, 1] + Q[1, 0]), float(Q[1, 1]))

    def stabilizer(self, u: float) -> np.ndarray:
        """Element of K_l with parameter u (t = sqrt(1 + u^2))."""
        t = math.sqrt(1.0 + u * u)
        return np.array([[t - self.beta * u, -2 * self.gamma * u],
                         [2 * self.alpha * u, t + self.beta * u]])

    def equals_up_to_sign(self, other: GeodesicForm, tol: float = 1e-10) -> bool:
        a = np.array([self.alpha, self.beta, self.gamma])
        b = np.array([other.alpha, other.beta, other.gamma])
        return min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) < tol


def geodesic_form(seg: GeodesicSegment) -> GeodesicForm:
    start, end = seg.endpoints()
    pts = [p.real if not math.isinf(abs(p)) else math.inf for p in (start, end)]
    fin = [p for p in pts if not math.isinf(p)]
    if len(fin) == 1:
        return GeodesicForm(0.0, 1.0, -fin[0])
    r1, r2 = fin
    c = 1.0 / abs(r1 - r2)
    return GeodesicForm(c, -c * (r1 + r2), c * r1 * r2)


def distance_to_complete_geodesic(form: GeodesicForm, z: complex) -> float:
    """Hyperbolic distance from z to the zero set of the form on the boundary."""
    # |Q(z)| / (Im z * sqrt(disc)) = sinh(distance) for the form's geodesic
    return math.asinh(abs(form.alpha * abs(z) ** 2 + form.beta * z.real + form.gamma)
                      / (z.imag * math.sqrt(form.discriminant)))


# --- vectorised geometry ------------------------------------------------------

def _segment_distance_many(h: np.ndarray, L: float) -> np.ndarray:
    """d(h.l0, l0) for l0 = {i e^x : 0 <= x <= L}, one value per matrix in h.

    The distance from h a(x) i to the convex set l0 is convex in x, so
    golden section over [0, L] finds the minimum; endpoints are added.
    """
    f = lambda x: _dist_to_vertical_segment(_moved_point(h, x), L)
    _, fmin = golden_section(f, np.zeros(len(h)), np.full(len(h), L), iters=60)
    return np.minimum(fmin, np.minimum(f(np.zeros(len(h))), f(np.full(len(h), L))))


def _moved_point(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    e = np.exp(np.asarray(x))
    # h a(x) i = h (i e^x)
    z = 1j * e
    return (h[:, 0, 0] * z + h[:, 0, 1]) / (h[:, 1, 0] * z + h[:, 1, 1])


def _align_sq(h: np.ndarray, t: np.ndarray) -> np.ndarray:
    # ||log(a(-t) h)||^2 with the sign fixed by trace >= 0
    em, ep = np.exp(-t / 2), np.exp(t / 2)
    m00, m01, m10, m11 = em * h[..., 0, 0], em * h[..., 0, 1], ep * h[..., 1, 0], ep * h[..., 1, 1]
    tau = np.abs(m00 + m11) / 2
    return _log_factor(tau) ** 2 * (((m00 - m11) / 2) ** 2 + m01 ** 2 + m10 ** 2)


def align_many(h: np.ndarray, grid: int = ALIGN_GRID) -> np.ndarray:
    """inf_t ||log(a(-t) h)|| for a stack of SL2 matrices (grid, then golden section)."""
    h = np.asarray(h, dtype=float)
    if len(h) == 0:
        return np.zeros(0)
    big = np.max(np.abs(h), axis=(1, 2))
    span = 2.0 * np.log(np.maximum(2.0, big)) + 4.0
    u = np.linspace(-1.0, 1.0, grid)
    ts = span[:, None] * u[None, :]
    vals = _align_sq(h[:, None], ts)
    i = np.argmin(vals, axis=1)
    rows = np.arange(len(h))
    lo = ts[rows, np.maximum(i - 1, 0)]
    hi = ts[rows, np.minimum(i + 1, grid - 1)]
    _, fg = golden_section(lambda t: _align_sq(h, t), lo, hi, iters=50)
    return np.sqrt(np.minimum(fg, vals[rows, i]))


# --- counting -----------------------------------------------------------------

@dataclass
class CountRecord:
    n: int
    kappa: float
    count: int
    bound: float
    ratio: float
    prefilter_survivors: int = 0
    false_rejections: int = 0


@dataclass
class NCount:
    """All records for one n, plus the prefilter audit."""

    n: int
    records: list
    enumerated: int
    geometric: int
    false_rejections: int
    worst_prefilter_ratio: float


def segment_radius(seg: GeodesicSegment) -> float:
    """Largest distance from i to a point of the segment (attained at an end)."""
    return float(max(hyp_dist(1j, seg.point(0.0)), hyp_dist(1j, seg.point(seg.length))))


def entry_bound(seg: GeodesicSegment) -> float:
    """Entries of gamma with d(gamma l, l) <= 1 are bounded by this.

    d(gamma i, i) <= 2 r + 1 for r the segment radius, and the Frobenius
    norm squared of an SL2 matrix is 2 cosh d(gamma i, i).
    """
    r = segment_radius(seg)
    if r > WORKING_RADIUS:
        raise ConfigInvalid(f"segment leaves the working region (radius {r:.3g} > {WORKING_RADIUS})")
    return min(C_BOX, math.sqrt(2.0 * math.cosh(2 * r + 1.0)))


def bound_value(n: int, kappa: float) -> float:
    return (kappa ** 2 + kappa ** 0.5) * n + 1


def prefilter_ratio(Y: np.ndarray, D: int, n: int, a: int, beta: float) -> np.ndarray:
    """|x0^2 - (a/beta^2) x1^2 - n| / n for coordinates x = Y / D."""
    x0 = Y[:, 0].astype(float) / D
    x1 = Y[:, 1].astype(float) / D
    return np.abs(x0 * x0 - (a / beta ** 2) * x1 * x1 - n) / n


def _geometric(mats: np.ndarray, seg: GeodesicSegment) -> tuple[np.ndarray, np.ndarray]:
    base = seg.base.m
    h = inv_mat(base) @ mats @ base
    dist = _segment_distance_many(h, seg.length)
    near = dist <= 1.0
    al = np.full(len(h), np.inf)
    al[near] = align_many(h[near])
    return near, al


def count_n(seg: GeodesicSegment, n: int, R: OrderBasis, kappas=KAPPA_GRID,
            prefilter_const: float = PREFILTER_CONST, check: bool = True,
            budget: int = DEFAULT_ENUM_BUDGET) -> NCount:
    kappas = sorted(float(k) for k in kappas)
    if not kappas:
        raise ConfigInvalid("empty kappa list")
    if n < 1 or kappas[0] <= 0 or kappas[-1] > 2:
        raise ConfigInvalid("need n >= 1 and 0 < kappa <= 2")
    form = geodesic_form(seg)
    if abs(form.beta) < 1e-3:
        raise ConfigInvalid("prefilter needs beta != 0; rotate the segment slightly")
    B = entry_bound(seg)
    Y, D = enumerate_norm_array(R, n, B, budget)
    mats = embed_matrix(Y.astype(float) / D, R.alg) / math.sqrt(n)
    ball = np.sum(mats ** 2, axis=(1, 2)) <= B * B * (1 + 1e-12)
    Y, mats = Y[ball], mats[ball]
    pr = prefilter_ratio(Y, D, n, R.alg.a, form.beta)
    kmax = kappas[-1]
    passed = pr <= prefilter_const * kmax
    todo = np.ones(len(Y), bool) if check else passed
    near = np.zeros(len(Y), bool)
    al = np.full(len(Y), np.inf)
    if todo.any():
        near[todo], al[todo] = _geometric(mats[todo], seg)
    records = []
    false_rej = 0
    worst = 0.0
    for k in kappas:
        geo = near & (al < k)
        pf = pr <= prefilter_const * k
        fr = int(np.sum(geo & ~pf)) if check else 0
        false_rej += fr
        if check and geo.any():
            worst = max(worst, float(np.max(pr[geo] / k)))
        c = int(np.sum(geo & pf)) if not check else int(np.sum(geo))
        bv = bound_value(n, k)
        records.append(CountRecord(n, k, c, bv, c / bv, int(np.sum(pf)), fr))
    return NCount(n, records, len(Y), int(np.sum(near)), false_rej, worst)


def count_M(seg: GeodesicSegment, n: int, kappa: float, R: OrderBasis, **kw) -> CountRecord:
    return count_n(seg, n, R, kappas=(kappa,), **kw).records[0]


def default_segment() -> GeodesicSegment:
    """Unit segment centred at i, tilted so that beta is generic."""
    return GeodesicSegment(GroupElement(k_mat(0.4) @ a_mat(-0.5)), 1.0)


@dataclass
class ScanReport:
    counts: list = field(default_factory=list)
    max_ratio: float = 0.0
    drift: float = math.nan
    block_maxima: dict = field(default_factory=dict)
    false_rejections: int = 0
    worst_prefilter_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return math.isfinite(self.max_ratio) and self.drift < 2.0 and self.false_rejections == 0


def scan_counts(seg: GeodesicSegment, R: OrderBasis, n_max: int, kappas=KAPPA_GRID,
                coprime_only: bool = True, check: bool = True, n_values=None) -> ScanReport:
    """Scan n <= n_max; drift compares dyadic-block maxima of M / bound for n >= 16."""
    if n_values is None:
        n_values = [n for n in range(1, n_max + 1) if not coprime_only or math.gcd(n, R.q) == 1]
    rep = ScanReport()
    for n in n_values:
        nc = count_n(seg, n, R, kappas, check=check)
        rep.counts.append(nc)
        rep.false_rejections += nc.false_rejections
        rep.worst_prefilter_ratio = max(rep.worst_prefilter_ratio, nc.worst_prefilter_ratio)
        top = max(r.ratio for r in nc.records)
        rep.max_ratio = max(rep.max_ratio, top)
        if n >= 16:
            blk = 1 << (n.bit_length() - 1)
            rep.block_maxima[blk] = max(rep.block_maxima.get(blk, 0.0), top)
    if rep.block_maxima:
        v = list(rep.block_maxima.values())
        rep.drift = max(v) / min(v)
    return rep


# --- amplifier inequalities ---------------------------------------------------

def _divisors_upto(N: int) -> list[list[int]]:
    divs = [[] for _ in range(N + 1)]
    for d in range(1, N + 1):
        for m in range(d, N + 1, d):
            divs[m].append(d)
    return divs


def harmonic(N: int) -> Fraction:
    return sum((Fraction(1, k) for k in range(1, N + 1)), Fraction(0))


@dataclass
class AmplifierReport:
    N: int
    lhs1: float
    rhs1_base: float  # N (sum |a|)^2
    eps1: float       # smallest eps with lhs1 <= N^eps * rhs1_base
    lhs2: float
    rhs2_base: float  # sum |a|^2
    C2: float         # lhs2 / rhs2_base
    eps2: float       # smallest eps with lhs2 <= N^eps * rhs2_base
    const1: float     # proven constant H_N for (alpha1)
    const2: float     # proven constant H_N * max tau(n) for (alpha2)

    @property
    def holds(self) -> bool:
        return self.lhs1 <= self.const1 * self.rhs1_base and self.lhs2 <= self.const2 * self.rhs2_base


def amplifier_sums(alpha) -> tuple[float, float]:
    """Both double divisor sums, regrouped by the common divisor d.

    sum_{m,n} sum_{d|(m,n)} (sqrt(mn)/d) |a_m a_n| = sum_d (1/d) (sum_{d|n} sqrt(n)|a_n|)^2
    sum_{m,n} sum_{d|(m,n)} (d/sqrt(mn)) |a_m a_n| = sum_d d (sum_{d|n} |a_n|/sqrt(n))^2
    """
    a = np.abs(np.asarray(alpha, dtype=complex))
    N = len(a)
    n = np.arange(1, N + 1, dtype=float)
    s1 = s2 = 0.0
    for d in range(1, N + 1):
        idx = slice(d - 1, N, d)
        u = float(np.sum(np.sqrt(n[idx]) * a[idx]))
        v = float(np.sum(a[idx] / np.sqrt(n[idx])))
        s1 += u * u / d
        s2 += d * v * v
    return s1, s2


def amplifier_sums_direct(alpha) -> tuple[float, float]:
    """Same sums by the literal double loop over (m, n) and common divisors."""
    a = np.abs(np.asarray(alpha, dtype=complex))
    N = len(a)
    divs = _divisors_upto(N)
    s1 = s2 = 0.0
    for m in range(1, N + 1):
        for n in range(1, N + 1):
            g = math.gcd(m, n)
            w = a[m - 1] * a[n - 1]
            if w == 0:
                continue
            r = math.sqrt(m * n)
            for d in divs[g]:
                s1 += r / d * w
                s2 += d / r * w
    return s1, s2


def amplifier_sum_checks(alpha, N: int | None = None) -> AmplifierReport:
    alpha = np.asarray(alpha, dtype=complex)
    if N is not None:
        alpha = alpha[:N]
    N = len(alpha)
    if not 1 <= N <= 10 ** 4:
        raise ConfigInvalid("need 1 <= N <= 10^4")
    s1, s2 = amplifier_sums(alpha)
    a = np.abs(alpha)
    base1 = N * float(np.sum(a)) ** 2
    base2 = float(np.sum(a * a))
    logN = math.log(N) if N > 1 else 1.0
    eps = lambda lhs, base: max(0.0, math.log(lhs / base) / logN) if base > 0 and N > 1 else 0.0
    HN = float(harmonic(N))
    tau_max = max(len(d) for d in _divisors_upto(N)[1:])
    return AmplifierReport(N, s1, base1, eps(s1, base1), s2, base2,
                           s2 / base2 if base2 else 0.0, eps(s2, base2), HN, HN * tau_max)
