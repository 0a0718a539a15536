"""PSL(2,R) structure used by every other module.

Conventions:
    k(t) = [[cos t/2, sin t/2], [-sin t/2, cos t/2]]
    a(y) = diag(e^{y/2}, e^{-y/2})          so a(y).i = e^y i
    n(x) = [[1, x], [0, 1]]
and every g factors as g = n(x) a(y) k(t).  For g = [[p, q], [r, s]] this gives
A(g) = y = -log(r^2 + s^2) and the K-angle t = 2 atan2(-r, s) mod 2pi.

Most functions accept stacked matrices of shape (..., 2, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfChart

TWO_PI = 2.0 * math.pi
CHART_RADIUS = 10.0
N_ALIGN_CEILING = 10.0


def k_mat(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    c, s = np.cos(th / 2), np.sin(th / 2)
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2)


def a_mat(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    e, z = np.exp(y / 2), np.zeros_like(y)
    return np.stack([np.stack([e, z], -1), np.stack([z, 1 / e], -1)], -2)


def n_mat(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    o, z = np.ones_like(x), np.zeros_like(x)
    return np.stack([np.stack([o, x], -1), np.stack([z, o], -1)], -2)


def inv_mat(g: np.ndarray) -> np.ndarray:
    """Inverse of determinant-one matrices."""
    g = np.asarray(g, dtype=float)
    out = np.empty_like(g)
    out[..., 0, 0] = g[..., 1, 1]
    out[..., 1, 1] = g[..., 0, 0]
    out[..., 0, 1] = -g[..., 0, 1]
    out[..., 1, 0] = -g[..., 1, 0]
    return out


def mobius(g: np.ndarray, z):
    g = np.asarray(g)
    return (g[..., 0, 0] * z + g[..., 0, 1]) / (g[..., 1, 0] * z + g[..., 1, 1])


def A_height(g: np.ndarray):
    g = np.asarray(g, dtype=float)
    return -np.log(g[..., 1, 0] ** 2 + g[..., 1, 1] ** 2)


def N_coord(g: np.ndarray):
    g = np.asarray(g, dtype=float)
    r, s = g[..., 1, 0], g[..., 1, 1]
    return (g[..., 0, 0] * r + g[..., 0, 1] * s) / (r * r + s * s)


def K_angle(g: np.ndarray):
    g = np.asarray(g, dtype=float)
    return np.mod(2.0 * np.arctan2(-g[..., 1, 0], g[..., 1, 1]), TWO_PI)


@dataclass(frozen=True)
class IwasawaCoords:
    x: float
    y: float
    theta: float

    def matrix(self) -> np.ndarray:
        return n_mat(self.x) @ a_mat(self.y) @ k_mat(self.theta)


class GroupElement:
    """Determinant-one 2x2 real matrix modulo +-1, stored with a canonical sign."""

    __slots__ = ("m",)

    def __init__(self, m, check: bool = True):
        m = np.array(m, dtype=float).reshape(2, 2)
        if check and abs(np.linalg.det(m) - 1.0) > 1e-12 * max(1.0, float(np.max(np.abs(m))) ** 2):
            raise ValueError(f"determinant {np.linalg.det(m)} != 1")
        lead = m[0, 0] if m[0, 0] != 0 else m[0, 1]
        self.m = -m if lead < 0 else m
        self.m.setflags(write=False)

    @classmethod
    def identity(cls):
        return cls(np.eye(2))

    @classmethod
    def k(cls, theta):
        return cls(k_mat(theta))

    @classmethod
    def a(cls, y):
        return cls(a_mat(y))

    @classmethod
    def n(cls, x):
        return cls(n_mat(x))

    def __matmul__(self, other):
        other_m = other.m if isinstance(other, GroupElement) else np.asarray(other)
        return GroupElement(self.m @ other_m, check=False)

    def inv(self) -> GroupElement:
        return GroupElement(inv_mat(self.m), check=False)

    def act(self, z):
        return mobius(self.m, z)

    def iwasawa(self) -> IwasawaCoords:
        return iwasawa(self)

    def __eq__(self, other):
        return isinstance(other, GroupElement) and np.array_equal(self.m, other.m)

    def __hash__(self):
        return hash(self.m.tobytes())

    def allclose(self, other, tol=1e-12) -> bool:
        return bool(np.max(np.abs(self.m - other.m)) < tol)

    def __repr__(self):
        return f"GroupElement({self.m.tolist()})"


def _as_m(g) -> np.ndarray:
    return g.m if isinstance(g, GroupElement) else np.asarray(g, dtype=float)


def iwasawa(g) -> IwasawaCoords:
    m = _as_m(g)
    return IwasawaCoords(float(N_coord(m)), float(A_height(m)), float(K_angle(m)))


def angle_map_sigma(g, theta):
    """sigma(theta): the K-angle of k(theta) g."""
    return K_angle(k_mat(theta) @ _as_m(g))


def A_derivative(g) -> float:
    """d/dt A(g a(t)) at t = 0, which equals cos of the K-angle of g."""
    return float(np.cos(K_angle(_as_m(g))))


def hyp_dist(z, w):
    """Hyperbolic distance in the upper half plane (cancellation-free form)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


# --- Lie algebra ---------------------------------------------------------

@dataclass(frozen=True)
class LieVector:
    """Traceless matrix [[X1, X2], [X3, -X1]]."""

    X1: float
    X2: float
    X3: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.X1, self.X2], [self.X3, -self.X1]])

    def norm(self) -> float:
        return math.sqrt(self.X1 ** 2 + self.X2 ** 2 + self.X3 ** 2)

    def exp(self) -> GroupElement:
        return GroupElement(lie_exp(self.matrix()), check=False)

    def scale(self, c: float) -> LieVector:
        return LieVector(c * self.X1, c * self.X2, c * self.X3)


def lie_exp(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    d = X[..., 0, 0] ** 2 + X[..., 0, 1] * X[..., 1, 0]
    r = np.sqrt(np.abs(d))
    small = r < 1e-8
    rs = np.where(small, 1.0, r)
    c = np.where(d >= 0, np.cosh(r), np.cos(r))
    f = np.where(d >= 0, np.sinh(rs) / rs, np.sin(rs) / rs)
    c = np.where(small, 1.0 + d / 2, c)
    f = np.where(small, 1.0 + d / 6, f)
    eye = np.broadcast_to(np.eye(2), X.shape)
    return c[..., None, None] * eye + f[..., None, None] * X


def _log_factor(tau):
    # phi(tau)/sinh-or-sin(phi(tau)) with tau = cosh/cos(phi); smooth through tau = 1
    tau = np.asarray(tau, dtype=float)
    u = tau - 1.0
    near = np.abs(u) < 1e-5
    hyp = np.arccosh(np.maximum(tau, 1.0)) / np.sqrt(np.maximum(tau * tau - 1.0, 1e-300))
    ell = np.arccos(np.clip(tau, -1.0, 1.0)) / np.sqrt(np.maximum(1.0 - tau * tau, 1e-300))
    out = np.where(tau > 1.0, hyp, ell)
    return np.where(near, 1.0 - u / 3.0 + 2.0 * u * u / 15.0, out)


def sl2_log(g) -> np.ndarray:
    """Principal logarithm of +-g (sign chosen with trace >= 0)."""
    m = _as_m(g)
    tr = m[..., 0, 0] + m[..., 1, 1]
    m = np.where((tr < 0)[..., None, None], -m, m)
    tau = np.abs(tr) / 2.0
    eye = np.broadcast_to(np.eye(2), m.shape)
    return _log_factor(tau)[..., None, None] * (m - tau[..., None, None] * eye)


def lie_norm(X: np.ndarray):
    X = np.asarray(X)
    return np.sqrt(X[..., 0, 0] ** 2 + X[..., 0, 1] ** 2 + X[..., 1, 0] ** 2)


def _dist_group_raw(m: np.ndarray):
    return lie_norm(sl2_log(m))


def dist_group(g, h) -> float:
    """Left-invariant chart distance ||log(g^-1 h)||."""
    d = float(_dist_group_raw(inv_mat(_as_m(g)) @ _as_m(h)))
    if d > CHART_RADIUS:
        raise OutOfChart(f"||log(g^-1 h)|| = {d:.3g} exceeds chart radius {CHART_RADIUS}")
    return d


def golden_section(f, lo, hi, iters: int = 80):
    """Vectorised golden-section minimisation of f over brackets [lo, hi].

    f maps an array of abscissae to values of the same shape.  Only
    unimodality is needed, so kinks at the minimum are harmless.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    r = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - r * (hi - lo)
    d = lo + r * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        nc = np.where(left, hi - r * (hi - lo), d)
        nd = np.where(left, c, lo + r * (hi - lo))
        fnew = f(np.where(left, nc, nd))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = nc, nd
    x = (lo + hi) / 2.0
    return x, f(x)


# --- geodesic segments ---------------------------------------------------

@dataclass(frozen=True)
class GeodesicSegment:
    """x -> g a(x) i for x in [0, length], oriented upward at g = e."""

    base: GroupElement
    length: float = 1.0

    def point(self, x):
        return mobius(self.base.m @ a_mat(x), 1j)

    def endpoints(self) -> tuple[complex, complex]:
        """Boundary endpoints (start, end) of the complete geodesic: g.0 and g.inf."""
        m = self.base.m
        start = m[0, 1] / m[1, 1] if m[1, 1] != 0 else complex("inf")
        end = m[0, 0] / m[1, 0] if m[1, 0] != 0 else complex("inf")
        return start, end

    def translate(self, h) -> GeodesicSegment:
        return GeodesicSegment(GroupElement(_as_m(h) @ self.base.m, check=False), self.length)


def _dist_to_vertical_segment(p, L: float):
    """Distance from points p to the segment {i e^x : 0 <= x <= L}."""
    p = np.asarray(p, dtype=complex)
    foot = np.log(np.abs(p))
    on = (foot >= 0.0) & (foot <= L)
    d_line = np.arcsinh(np.abs(p.real) / p.imag)
    d0 = hyp_dist(p, 1j)
    d1 = hyp_dist(p, 1j * math.exp(L))
    return np.where(on, d_line, np.minimum(d0, d1))


def dist_geodesics(l1: GeodesicSegment, l2: GeodesicSegment, samples: int = 256) -> float:
    """inf of the hyperbolic distance between points of two segments.

    After moving l1 to the vertical segment, the distance to it is a convex
    function of the parameter on l2; a grid locates the basin and Brent
    refines it, with crossings of the imaginary axis added as candidates.
    """
    h = inv_mat(l1.base.m) @ l2.base.m
    L1, L2 = l1.length, l2.length
    f = lambda x: float(_dist_to_vertical_segment(mobius(h @ a_mat(x), 1j), L1))
    xs = np.linspace(0.0, L2, samples)
    ps = mobius(h @ a_mat(xs), 1j)
    vals = _dist_to_vertical_segment(ps, L1)
    best_x, best = float(xs[np.argmin(vals)]), float(vals.min())
    i = int(np.argmin(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, samples - 1)]
    if hi > lo:
        xg, fg = golden_section(lambda x: _dist_to_vertical_segment(mobius(h @ a_mat(x), 1j), L1), lo, hi)
        if fg < best:
            best_x, best = float(xg), float(fg)
    re = ps.real
    for j in np.nonzero(np.sign(re[:-1]) * np.sign(re[1:]) < 0)[0]:
        x0 = brentq(lambda x: float(mobius(h @ a_mat(x), 1j).real), xs[j], xs[j + 1], xtol=1e-15)
        best = min(best, f(x0))
    for x in (0.0, L2):
        best = min(best, f(x))
    return best


def _align_objective(m: np.ndarray, t):
    return _dist_group_raw(a_mat(-np.asarray(t)) @ m)


def n_align_element(m: np.ndarray, samples: int = 256) -> tuple[float, float]:
    """(inf_t ||log(a(-t) m)||, argmin t), clamped at N_ALIGN_CEILING."""
    m = _as_m(m)
    span = 2.0 * math.log(max(2.0, float(np.max(np.abs(m))))) + 4.0
    ts = np.linspace(-span, span, samples)
    vals = _align_objective(m, ts)
    i = int(np.nanargmin(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, samples - 1)]
    tg, fg = golden_section(lambda t: _align_objective(m, t), lo, hi)
    val, tstar = (float(fg), float(tg)) if fg <= vals[i] else (float(vals[i]), float(ts[i]))
    return min(val, N_ALIGN_CEILING), tstar


def n_align(l1: GeodesicSegment, l2: GeodesicSegment) -> float:
    """Alignment distance inf over a in A of d_G(g1^-1 g2, a)."""
    return n_align_element(inv_mat(l1.base.m) @ l2.base.m)[0]


def mixed_flow_derivative(y: float, right_n: bool = True, h: float = 1e-3) -> float:
    """Mixed derivative of A along the N- and K-flows at a(y), by central differences.

    With right_n the N-flow translates on the right (a(y) n(u)), otherwise both
    flows act on the left (k(t) n(u) a(y)).  The K-flow always acts on the left.
    """
    def F(t, u):
        base = a_mat(y) @ n_mat(u) if right_n else n_mat(u) @ a_mat(y)
        return float(A_height(k_mat(t) @ base))

    def D(hh):
        return (F(hh, hh) - F(hh, -hh) - F(-hh, hh) + F(-hh, -hh)) / (4 * hh * hh)

    return (4 * D(h / 2) - D(h)) / 3
