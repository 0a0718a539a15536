"""Stationary-phase structure of the two-geodesic plane-wave integral.

For a ratio rho = cos(alpha) and g in PSL(2,R) the phase is

    phi(x1, x2, theta) = rho (x1 - x2) - A(k(theta) a(x1)) + A(k(theta) g a(x2)).

Eliminating x1, x2 at their critical values xi1(theta), xi2(theta) gives the
reduced phase psi(theta).  Two facts are used throughout:

* d/dx A(m a(x)) is cos of the K-angle of m a(x), so the x-critical points
  are where the rotated geodesics make angle +-alpha with the vertical;
* d/dtheta A(k(theta) m) is the N-coordinate of k(theta) m, so
  psi'(theta) = N(k(theta) g a(xi2)) - N(k(theta) a(xi1)) and critical
  points of psi are exactly the theta where both points share a vertical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ChartExceeded, ConfigInvalid, OnSingularSet
from .group_geometry import (
    A_height, GroupElement, K_angle, N_coord, TWO_PI, a_mat, golden_section,
    inv_mat, k_mat, n_align_element, n_mat,
)

SCAN_PANELS = 1024
SINGULAR_TOL = 1e-6
FD_STEPS = (1e-3, 5e-4)
FD_STEPS_THIRD = (2e-3, 1e-3)
SMALL_ANGLE_CHART = 0.5


@dataclass(frozen=True)
class PhaseContext:
    g: GroupElement
    rho: float
    delta: float = 0.05

    def __post_init__(self):
        if not isinstance(self.g, GroupElement):
            object.__setattr__(self, "g", GroupElement(self.g))
        if not 0 < self.delta < 0.5:
            raise ConfigInvalid(f"margin delta={self.delta} must lie in (0, 1/2)")
        # rho = 0 is the lambda = 0 case and is allowed on its own
        if self.rho != 0 and not self.delta <= self.rho <= 1 - self.delta:
            raise ConfigInvalid(f"rho={self.rho} outside [{self.delta}, {1 - self.delta}]")

    @property
    def alpha(self) -> float:
        return math.acos(self.rho)

    def with_g(self, g) -> PhaseContext:
        return PhaseContext(g, self.rho, self.delta)


@dataclass(frozen=True)
class CriticalPoint:
    x1: float
    x2: float
    theta: float
    beta1: float
    beta2: float
    h: float
    kappa: float
    degenerate: bool = False


@dataclass(frozen=True)
class DegeneracyLabel:
    kind: str  # nondegenerate | D1 | D2plus | D2minus | lambda0-degenerate
    y: float | None = None
    angle: float | None = None
    witness: float | None = None


@dataclass
class UniformizeReport:
    xi1_min: float
    xi1_dy_max: float
    xi2_at_zero: float
    xi2_parity: float
    jacobian_min: float
    grid: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.xi1_min > 0 and self.jacobian_min > 0 and self.xi2_at_zero == 0.0


# --- phase ----------------------------------------------------------------

def phase_value(x1, x2, theta, ctx: PhaseContext):
    x1, x2, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, theta)))
    k = k_mat(theta)
    return (ctx.rho * (x1 - x2) - A_height(k @ a_mat(x1))
            + A_height(k @ ctx.g.m @ a_mat(x2)))


def phase_gradient(x1, x2, theta, ctx: PhaseContext) -> np.ndarray:
    """Analytic gradient (d/dx1, d/dx2, d/dtheta)."""
    k = k_mat(theta)
    p1 = k @ a_mat(x1)
    p2 = k @ ctx.g.m @ a_mat(x2)
    return np.array([
        ctx.rho - np.cos(K_angle(p1)),
        -ctx.rho + np.cos(K_angle(p2)),
        N_coord(p2) - N_coord(p1),
    ])


def _half_tan(m: np.ndarray):
    """tan of half the K-angle of m, from the bottom row (-r/s)."""
    return -m[..., 1, 0] / m[..., 1, 1]


def _singular_distance(m: np.ndarray):
    sig = K_angle(m)
    r = np.mod(sig, math.pi)
    return np.minimum(r, math.pi - r)


def singular_thetas(ctx: PhaseContext) -> np.ndarray:
    """theta in [0, 2pi) where k(theta) l or k(theta) g l is vertical (at most 4)."""
    g = ctx.g.m
    vals = [0.0, math.pi,
            (2 * math.atan2(g[1, 0], g[0, 0])) % TWO_PI,
            (2 * math.atan2(g[1, 1], g[0, 1])) % TWO_PI]
    out = []
    for v in sorted(vals):
        if v >= TWO_PI - 1e-15:
            v = 0.0
        if not any(abs(v - u) < 1e-14 for u in out):
            out.append(v)
    return np.array(sorted(out))


def _xi_raw(theta, ctx: PhaseContext):
    theta = np.asarray(theta, dtype=float)
    k = k_mat(theta)
    kg = k @ ctx.g.m
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.tan(theta / 2)
        t2 = _half_tan(kg)
    la = math.log(math.tan(ctx.alpha / 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        xi1 = la - np.log(np.abs(t1))
        xi2 = la - np.log(np.abs(t2))
    d = np.minimum(_singular_distance(k), _singular_distance(kg))
    return xi1, xi2, np.sign(t1), np.sign(t2), d, k, kg


def xi_points(theta: float, ctx: PhaseContext, tol: float = SINGULAR_TOL) -> tuple[float, float]:
    """Critical x1, x2 for fixed theta: e^{xi} tan(sigma/2) = tan(eps alpha/2)."""
    xi1, xi2, _, _, d, _, _ = _xi_raw(theta, ctx)
    if d < tol:
        raise OnSingularSet(f"theta={theta} is within {tol} of the singular set")
    return float(xi1), float(xi2)


def xi_signs(theta: float, ctx: PhaseContext) -> tuple[int, int]:
    """Orientation signs (eps1, eps2); eps1 = +1 exactly when theta in (0, pi)."""
    _, _, e1, e2, _, _, _ = _xi_raw(theta, ctx)
    return int(e1), int(e2)


def reduced_psi(theta, ctx: PhaseContext, tol: float = SINGULAR_TOL):
    xi1, xi2, _, _, d, k, kg = _xi_raw(theta, ctx)
    if np.any(d < tol):
        raise OnSingularSet("reduced phase requested on the singular set")
    return (ctx.rho * (xi1 - xi2) - A_height(k @ a_mat(xi1)) + A_height(kg @ a_mat(xi2)))


def reduced_psi_prime(theta, ctx: PhaseContext, tol: float | None = SINGULAR_TOL):
    """Analytic psi'(theta); returns nan near the singular set when tol is None."""
    xi1, xi2, _, _, d, k, kg = _xi_raw(theta, ctx)
    val = N_coord(kg @ a_mat(xi2)) - N_coord(k @ a_mat(xi1))
    near = d < SINGULAR_TOL
    if tol is not None and np.any(near):
        raise OnSingularSet("reduced phase derivative requested on the singular set")
    return np.where(near, np.nan, val)


def psi_lie_derivative(theta: float, X1: float, X2: float, ctx: PhaseContext) -> float:
    """d/dt psi(theta, exp(tX)) at t = 0 and g = e, X = [[0, X1], [X2, 0]]."""
    e = ctx.with_g(GroupElement.identity())
    xi1, xi2 = xi_points(theta, e)
    eps = 1 if 0 < theta % TWO_PI < math.pi else -1
    return eps * math.sin(ctx.alpha) * (math.exp(-xi2) * X1 + math.exp(xi2) * X2)


# --- critical points ------------------------------------------------------

def _kappa(x1: float, theta: float) -> float:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    e = math.exp(x1)
    return e / (c * c + e * e * s * s)


def make_critical_point(theta: float, ctx: PhaseContext, degenerate: bool = False) -> CriticalPoint:
    x1, x2 = xi_points(theta, ctx)
    e1, e2 = xi_signs(theta, ctx)
    b1, b2 = e1 * ctx.alpha, e2 * ctx.alpha
    rel = k_mat(b1) @ a_mat(-x1) @ ctx.g.m @ a_mat(x2)
    return CriticalPoint(x1, x2, float(theta) % TWO_PI, b1, b2, float(A_height(rel)),
                         _kappa(x1, theta), degenerate)


def _arcs(ctx: PhaseContext, margin: float):
    sing = singular_thetas(ctx)
    ext = np.append(sing, sing[0] + TWO_PI)
    return [(lo + margin, hi - margin) for lo, hi in zip(ext[:-1], ext[1:]) if hi - lo > 2 * margin]


def _refine_extremum(f, a, b, sign):
    t, _ = golden_section(lambda x: sign * f(x), a, b, iters=80)
    t = float(t)
    return t, float(f(t))


def critical_scan(ctx: PhaseContext, panels: int = SCAN_PANELS, margin: float = SINGULAR_TOL):
    """Label plus isolated critical points found by sign scan and bisection.

    Roots closer than one panel are separated by locating the extrema of
    psi' between grid nodes. Roots within `margin` of the singular set are
    not searched for.
    """
    label = classify_degeneracy(ctx)
    if label.kind in ("D1", "lambda0-degenerate"):
        return label, []
    f = lambda t: reduced_psi_prime(t, ctx, tol=None)
    roots: list[tuple[float, bool]] = []
    for lo, hi in _arcs(ctx, margin):
        n = max(8, int(math.ceil(panels * (hi - lo) / TWO_PI)))
        th = np.linspace(lo, hi, n + 1)
        v = f(th)
        nodes = list(zip(th, v))
        # split panels at interior extrema of psi' that cross zero
        extra = []
        for i in range(1, n):
            d0, d1 = v[i] - v[i - 1], v[i + 1] - v[i]
            if d0 * d1 < 0 and v[i - 1] * v[i] > 0 and v[i] * v[i + 1] > 0:
                sgn = 1.0 if d0 < 0 else -1.0  # minimum if decreasing then increasing
                te, ve = _refine_extremum(f, th[i - 1], th[i + 1], sgn)
                extra.append((te, ve))
        nodes = sorted(nodes + extra)
        scale = max(1.0, float(np.nanmax(np.abs(v))))
        for (ta, va), (tb, vb) in zip(nodes[:-1], nodes[1:]):
            if not (np.isfinite(va) and np.isfinite(vb)):
                continue
            if va == 0.0:
                roots.append((ta, False))
            elif va * vb < 0:
                roots.append((brentq(f, ta, tb, xtol=1e-15, rtol=4 * np.finfo(float).eps), False))
        for te, ve in extra:
            if abs(ve) < 1e-12 * scale:
                roots.append((te, True))
    roots.sort()
    pts: list[CriticalPoint] = []
    for t, deg in roots:
        if pts and abs(t - pts[-1].theta) < 1e-10:
            continue
        cp = make_critical_point(t, ctx, degenerate=deg)
        if abs(cp.h) < 1e-6 and not cp.degenerate:
            cp = make_critical_point(t, ctx, degenerate=True)
        pts.append(cp)
    return label, pts


def find_critical_points(ctx: PhaseContext, panels: int = SCAN_PANELS) -> list[CriticalPoint]:
    """Isolated critical points; empty when psi vanishes identically (g in A)."""
    return critical_scan(ctx, panels)[1]


def critical_point_residuals(cp: CriticalPoint, ctx: PhaseContext, steps=(1e-4, 5e-5)) -> dict:
    p = np.array([cp.x1, cp.x2, cp.theta])
    f = lambda v: float(phase_value(*v, ctx))
    grad = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        grad[i] = _richardson(lambda h: (f(p + h * e) - f(p - h * e)) / (2 * h), steps)
    k = k_mat(cp.theta)
    p1, p2 = k @ a_mat(cp.x1), k @ ctx.g.m @ a_mat(cp.x2)
    return {
        "grad_fd": float(np.linalg.norm(grad)),
        "vertical_gap": float(abs(N_coord(p2) - N_coord(p1))),
        "h_gap": float(abs(cp.h - (A_height(p2) - A_height(p1)))),
    }


# --- Hessian --------------------------------------------------------------

def hessian_analytic(cp: CriticalPoint, ctx: PhaseContext, form: str = "derived") -> tuple[np.ndarray, float]:
    """Hessian of phi in (x1, x2, theta) at a critical point, and its determinant.

    form="derived" uses d^2 phi/dx1^2 = sin^2 alpha, which follows from
    d beta/dx = sin beta along a geodesic.  form="stated" keeps the
    published diagonal (1/2) sin^2 alpha and determinant (3/8) k^2 sin^4 a (1 - e^{2h});
    the off-diagonal entries and the (3,3) entry agree in both forms.
    """
    sa2 = math.sin(ctx.alpha) ** 2
    k, eh = cp.kappa, math.exp(cp.h)
    d13 = k * math.sin(cp.beta1)
    d23 = -k * eh * math.sin(cp.beta2)
    d33 = k * k * (1 - eh * eh) / 2
    if form == "derived":
        d11, c = sa2, 0.5
    elif form == "stated":
        d11, c = sa2 / 2, 3 / 8
    else:
        raise ValueError(f"unknown form {form!r}")
    D = np.array([[d11, 0.0, d13], [0.0, -d11, d23], [d13, d23, d33]])
    return D, c * k * k * sa2 * sa2 * (1 - eh * eh)


def reduced_second_derivative(cp: CriticalPoint, form: str = "derived") -> float:
    """psi''(theta') from the Schur complement of the Hessian."""
    c = {"derived": 0.5, "stated": 1.5}[form]
    return -c * cp.kappa ** 2 * (1 - math.exp(2 * cp.h))


def _richardson(d, steps):
    h1, h2 = steps
    r = (h1 / h2) ** 2
    return (r * d(h2) - d(h1)) / (r - 1)


def fd_hessian(f, p, steps=FD_STEPS) -> np.ndarray:
    """Central second differences of a scalar function, Richardson-extrapolated."""
    p = np.asarray(p, dtype=float)
    n = p.size

    def H(h):
        out = np.empty((n, n))
        f0 = f(p)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h
            out[i, i] = (f(p + ei) - 2 * f0 + f(p - ei)) / (h * h)
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = h
                out[i, j] = out[j, i] = (f(p + ei + ej) - f(p + ei - ej)
                                         - f(p - ei + ej) + f(p - ei - ej)) / (4 * h * h)
        return out

    return _richardson(H, steps)


def fd_derivative(f, x: float, order: int, steps=None) -> float:
    if steps is None:
        steps = FD_STEPS_THIRD if order == 3 else FD_STEPS

    def D(h):
        if order == 1:
            return (f(x + h) - f(x - h)) / (2 * h)
        if order == 2:
            return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
        if order == 3:
            return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h ** 3)
        raise ValueError("order must be 1, 2 or 3")

    return float(_richardson(D, steps))


def hessian_numeric(cp: CriticalPoint, ctx: PhaseContext, steps=FD_STEPS) -> np.ndarray:
    return fd_hessian(lambda v: float(phase_value(v[0], v[1], v[2], ctx)),
                      [cp.x1, cp.x2, cp.theta], steps)


def psi_second_numeric(cp: CriticalPoint, ctx: PhaseContext) -> float:
    return fd_derivative(lambda t: float(reduced_psi(t, ctx)), cp.theta, 2)


def psi_third_numeric(theta: float, ctx: PhaseContext) -> float:
    return fd_derivative(lambda t: float(reduced_psi(t, ctx)), theta, 3)


# --- degeneracy -----------------------------------------------------------

def intersection_angle(g) -> tuple[float, float] | None:
    """(y, angle) with g in a(y) k(angle) A, or None when l and g l are disjoint."""
    m = g.m if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    if m[1, 1] == 0 or m[1, 0] == 0:
        return None
    u, v = m[0, 1] / m[1, 1], m[0, 0] / m[1, 0]
    if u * v >= 0:
        return None
    y = 0.5 * math.log(-u * v)
    r = a_mat(-y) @ m
    ang = 2 * math.atan2(r[0, 1], r[1, 1])
    ang = (ang + math.pi) % TWO_PI - math.pi
    return y, ang


def d2_witness(y: float, alpha: float, sign: int) -> float:
    """theta in (0, 2pi) with cot(theta/2) = -sign e^y cot(alpha/2)."""
    c = -sign * math.exp(y) / math.tan(alpha / 2)
    return 2 * math.atan2(1.0, c)


def classify_degeneracy(ctx: PhaseContext, tol: float = 1e-8) -> DegeneracyLabel:
    m = ctx.g.m
    in_A = n_align_element(m)[0] < tol
    if ctx.rho == 0:
        w_inv = inv_mat(k_mat(math.pi))
        if in_A or n_align_element(w_inv @ m)[0] < tol:
            return DegeneracyLabel("lambda0-degenerate")
        return DegeneracyLabel("nondegenerate")
    if in_A:
        return DegeneracyLabel("D1")
    hit = intersection_angle(m)
    if hit is not None:
        y, ang = hit
        for sign, name in ((1, "D2plus"), (-1, "D2minus")):
            if abs(ang - sign * 2 * ctx.alpha) < tol:
                return DegeneracyLabel(name, y=y, angle=ang, witness=d2_witness(y, ctx.alpha, sign))
    return DegeneracyLabel("nondegenerate")


def d2_family(y: float, alpha: float, eps: float, y2: float = 0.0, sign: int = 1) -> GroupElement:
    """g = a(y) k(sign (2 alpha + eps)) a(y2): a small perturbation off D2."""
    return GroupElement(a_mat(y) @ k_mat(sign * (2 * alpha + eps)) @ a_mat(y2))


def d2_pair(ctx: PhaseContext, y: float, sign: int = 1, window: float = 0.5) -> tuple[CriticalPoint, CriticalPoint]:
    """The two critical points nearest the D2 witness for a perturbed g."""
    wit = d2_witness(y, ctx.alpha, sign)
    pts = find_critical_points(ctx)
    near = sorted((p for p in pts if abs((p.theta - wit + math.pi) % TWO_PI - math.pi) < window),
                  key=lambda p: abs((p.theta - wit + math.pi) % TWO_PI - math.pi))
    if len(near) < 2:
        raise OnSingularSet(f"expected two critical points near {wit}, found {len(near)}")
    return tuple(sorted(near[:2], key=lambda p: p.theta))


def config_from_critical_point(rho: float, x1: float, x2: float, h: float, sign2: int = 1) -> tuple[GroupElement, float]:
    """g with a critical point at (x1, x2, theta') of aperture h; returns (g, theta').

    theta' in (0, pi) is fixed by x1 and rho; the second geodesic is placed
    through the point at signed distance h up the common vertical, making
    angle sign2*alpha with it.
    """
    alpha = math.acos(rho)
    theta = 2 * math.atan(math.exp(-x1) * math.tan(alpha / 2))
    p1 = k_mat(theta) @ a_mat(x1)
    n1, y1 = float(N_coord(p1)), float(A_height(p1))
    g = k_mat(-theta) @ n_mat(n1) @ a_mat(y1 + h) @ k_mat(sign2 * alpha) @ a_mat(-x2)
    return GroupElement(g), theta


# --- uniformisation -------------------------------------------------------

def _xi_small_angle(theta, x, y):
    sig = K_angle(k_mat(theta) @ n_mat(x) @ a_mat(y))
    return 2 * np.sin(sig / 2) ** 2 / theta ** 2


def _xi_radial(y, theta):
    u = 2 * np.exp(y) * np.sin(theta / 2) ** 2
    ratio = np.log1p(u * np.sinh(y)) / np.where(y == 0, 1.0, y)
    ratio = np.where(y == 0, u, ratio)
    return np.sign(theta) * np.sqrt(ratio)


def uniformize_checks(theta_max: float = 0.1, D: float = 1.0, n: int = 21, h: float = 1e-4) -> UniformizeReport:
    """Grid checks of the two small-angle uniformisations of A.

    xi(theta, x, y) = (1 - dA/dy (k(theta) n(x) a(y))) / theta^2 must stay
    bounded below with bounded y-derivative, and
    xi(y, theta) = sign(theta) sqrt((y - A(k(theta) a(y))) / y) must vanish at
    theta = 0 with dxi/dtheta bounded away from zero.
    """
    if theta_max > SMALL_ANGLE_CHART:
        raise ChartExceeded(f"theta_max={theta_max} exceeds the small-angle chart {SMALL_ANGLE_CHART}")
    th = np.linspace(-theta_max, theta_max, 2 * n)  # even count skips theta = 0
    xs = np.linspace(-D, D, n)
    T, X, Y = np.meshgrid(th, xs, xs, indexing="ij")
    xi = _xi_small_angle(T, X, Y)
    dxi = (_xi_small_angle(T, X, Y + h) - _xi_small_angle(T, X, Y - h)) / (2 * h)
    ys = np.linspace(0.05, 2 * D, n)
    th0 = np.linspace(-theta_max, theta_max, 2 * n + 1)
    Yr, Tr = np.meshgrid(ys, th0, indexing="ij")
    xr = _xi_radial(Yr, Tr)
    jac = (_xi_radial(Yr, Tr + h) - _xi_radial(Yr, Tr - h)) / (2 * h)
    return UniformizeReport(
        xi1_min=float(np.min(np.abs(xi))),
        xi1_dy_max=float(np.max(np.abs(dxi))),
        xi2_at_zero=float(np.max(np.abs(_xi_radial(ys, np.zeros_like(ys))))),
        xi2_parity=float(np.max(np.abs(xr + xr[:, ::-1]))),
        jacobian_min=float(np.min(np.abs(jac))),
        grid={"theta_max": theta_max, "D": D, "n": n},
    )
