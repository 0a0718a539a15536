"""Spherical functions, Paley-Wiener windows and the kernels they synthesise.

phi_s(a(r)) is computed from its plane-wave integral
    phi_s(a(r)) = (1/2pi) int_0^{2pi} exp((1/2 - i s) A(k(t) a(r))) dt,
    A(k(t) a(r)) = -log(e^{-r} + 2 sinh(r) sin^2(t/2)),
with the periodic trapezoid rule.  Radial kernels come from the inversion
    k(a(x)) = (1/2pi) int_0^inf phi_s(a(x)) H(s) s tanh(pi s) ds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import AccuracyNotReached, FitDegenerate

MAX_THETA_NODES = 1 << 22


def A_rot_a(theta, r):
    """A(k(theta) a(r)) in a cancellation-free closed form."""
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    return -np.log(np.exp(-r) + 2.0 * np.sinh(r) * np.sin(theta / 2.0) ** 2)


def _half_circle(n: int):
    """Nodes and weights on [0, pi] equivalent to the n-point periodic rule for even integrands."""
    j = np.arange(n // 2 + 1)
    th = 2.0 * math.pi * j / n
    w = np.full(j.shape, 2.0 / n)
    w[0] = w[-1] = 1.0 / n
    return th, w


def _phi_fixed(s, r: float, n: int):
    s = np.asarray(s, dtype=complex)
    th, w = _half_circle(n)
    A = A_rot_a(th, r)
    E = np.exp(np.multiply.outer(0.5 - 1j * s, A))
    return E @ w


def theta_nodes(s_max: float, r: float) -> int:
    n = 64 + 8 * math.ceil(abs(s_max) * abs(r))
    return n + (n % 2)


def spherical_phi(s, r: float, tol: float = 1e-14, max_nodes: int = MAX_THETA_NODES) -> complex:
    """phi_s(a(r)) by the plane-wave integral, doubling nodes until converged."""
    r = abs(float(r))
    if r == 0.0:
        return complex(1.0)
    n = theta_nodes(abs(complex(s)), r)
    prev = complex(_phi_fixed(s, r, n))
    while n < max_nodes:
        n *= 2
        cur = complex(_phi_fixed(s, r, n))
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise AccuracyNotReached(f"phi_s not converged for s={s}, r={r}", achieved=abs(cur - prev))


def spherical_phi_many(s, r: float, tol: float = 1e-13) -> np.ndarray:
    """phi at many real s for one r; node count set by max |s| and checked by doubling there."""
    s = np.asarray(s, dtype=float)
    r = abs(float(r))
    if r == 0.0:
        return np.ones(s.shape)
    smax = float(np.max(np.abs(s)))
    n = theta_nodes(smax, r)
    while True:
        a = complex(_phi_fixed(smax, r, n))
        b = complex(_phi_fixed(smax, r, 2 * n))
        if abs(a - b) <= tol:
            break
        n *= 2
        if n > MAX_THETA_NODES:
            raise AccuracyNotReached(f"phi_s grid not converged at s={smax}, r={r}")
    th, w = _half_circle(n)
    A = A_rot_a(th, r)
    return (np.cos(np.multiply.outer(s, A)) * np.exp(0.5 * A)) @ w


def _phi_radii_fixed(s: float, r: np.ndarray, n: int, chunk: int = 1 << 22) -> np.ndarray:
    th, w = _half_circle(n)
    out = np.empty(r.shape)
    step = max(1, chunk // len(th))
    for i in range(0, len(r), step):
        A = A_rot_a(th[None, :], r[i:i + step, None])
        out[i:i + step] = (np.cos(s * A) * np.exp(0.5 * A)) @ w
    return out


def spherical_phi_radii(s: float, r, tol: float = 1e-13) -> np.ndarray:
    """phi_s(a(r)) for one real s at many radii; nodes doubled until every radius agrees."""
    r = np.abs(np.asarray(r, dtype=float)).ravel()
    n = theta_nodes(abs(s), float(np.max(r, initial=0.0)))
    prev = _phi_radii_fixed(s, r, n)
    while True:
        n *= 2
        if n > MAX_THETA_NODES:
            raise AccuracyNotReached(f"phi_s radii grid not converged at s={s}")
        cur = _phi_radii_fixed(s, r, n)
        if np.max(np.abs(cur - prev), initial=0.0) <= tol:
            return cur
        prev = cur


# --- windows ---------------------------------------------------------------

@dataclass(frozen=True)
class SpectralWindow:
    """h(s) = c (sin(eps s)/(eps s))^{2M}, recentred as h_t(s) = h(s-t) + h(-s-t)."""

    t: float
    eps: float = 0.03
    M: int = 8
    c: float = field(init=False)

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("need M >= 2")
        # the sinc power is decreasing on [0, 1], so the minimum over [-1, 1] sits at s = 1
        object.__setattr__(self, "c", 1.0 / (math.sin(self.eps) / self.eps) ** (2 * self.M))

    def h(self, s):
        return self.c * np.sinc(self.eps * np.asarray(s, dtype=float) / math.pi) ** (2 * self.M)

    def ht(self, s):
        s = np.asarray(s, dtype=float)
        return self.h(s - self.t) + self.h(-s - self.t)

    def fourier_support(self, power: int = 1) -> float:
        return power * 2 * self.M * self.eps

    def tail_bound(self, W: float, power: int) -> float:
        """Upper bound on the synthesis integrand mass beyond |s - t| > W (per unit |phi|)."""
        q = 2 * self.M * power
        e = self.eps
        t = self.t
        # |h(u)| <= c (e u)^{-M2}; integrate (c (e u)^{-q}) (t + u) over u > W, both sides
        body = (t * W ** (1 - q) / (q - 1) + W ** (2 - q) / (q - 2)) * (self.c ** power) * e ** (-q)
        return 2.0 * body / (2.0 * math.pi)

    def truncation_width(self, power: int, tol: float = 1e-10) -> float:
        W = math.pi / self.eps
        while self.tail_bound(W, power) > tol:
            W *= 1.1
        return W


def two_sided_window(t: float, eps: float = 0.03, M: int = 8) -> SpectralWindow:
    if t <= 10:
        raise ValueError("two-sided window needs t > 10")
    return SpectralWindow(float(t), eps, M)


# --- synthesis ---------------------------------------------------------------

@dataclass
class KernelProfile:
    xs: np.ndarray
    values: np.ndarray
    window: SpectralWindow
    power: int
    tail_bound: float

    def normalized(self) -> np.ndarray:
        t = self.window.t
        return np.abs(self.values) * np.sqrt(1.0 + t * np.abs(self.xs)) / t


def spectral_grid(w: SpectralWindow, power: int, ds: float = 0.5, tol: float = 1e-10):
    W = w.truncation_width(power, tol)
    lo = max(0.0, w.t - W)
    n = int(math.ceil((w.t + W - lo) / ds))
    s = lo + ds * np.arange(n + 1)
    wts = np.full(s.shape, ds)
    wts[0] = wts[-1] = ds / 2
    dens = w.ht(s) ** power * s * np.tanh(math.pi * s) / (2.0 * math.pi)
    return s, wts * dens, w.tail_bound(W, power)


def synthesize_kernel(w: SpectralWindow, power: int, x, ds: float = 0.5) -> float | np.ndarray:
    """k(a(x)) with Harish-Chandra transform h_t^power."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(xs) > 2.0 + 1e-12):
        raise ValueError("|x| <= 2 required")
    s, wd, _ = spectral_grid(w, power, ds)
    out = np.array([spherical_phi_many(s, xv) @ wd for xv in xs])
    return out if np.ndim(x) else float(out[0])


def synthesize_profile(w: SpectralWindow, power: int, xs, ds: float = 0.5) -> KernelProfile:
    xs = np.asarray(xs, dtype=float)
    _, _, tail = spectral_grid(w, power, ds)
    return KernelProfile(xs, synthesize_kernel(w, power, xs, ds), w, power, tail)


def forward_hc_transform(k_fn, s, R: float = 1.0, nodes: int = 200) -> np.ndarray:
    """2pi int_0^R k(r) phi_s(a(r)) sinh r dr, for radial k supported in [0, R]."""
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * R * (gx + 1.0)
    wr = 0.5 * R * gw
    kv = np.asarray(k_fn(r), dtype=float)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    Phi = np.array([spherical_phi_many(s, rv) for rv in r])  # (r, s)
    return 2.0 * math.pi * ((kv * np.sinh(r) * wr) @ Phi)


def kernel_support_mass(profile: KernelProfile, radius: float = 1.0) -> float:
    """Relative mass of |k| sinh(x) beyond radius, from a uniform profile grid."""
    xs, v = profile.xs, np.abs(profile.values) * np.sinh(np.abs(profile.xs))
    inside = trapezoid(np.where(xs <= radius, v, 0.0), xs)
    outside = trapezoid(np.where(xs > radius, v, 0.0), xs)
    return float(outside / (inside + outside))


def pt_fourier(w: SpectralWindow, lam, R: float = 1.0, panels: int | None = None,
               power: int = 2, ds: float = 0.5) -> np.ndarray:
    """Fourier transform of p_t(x) = k_t(a(x)) (even, supported in |x| < R) at frequencies lam."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    top = max(w.t + w.truncation_width(power), float(np.max(np.abs(lam))))
    if panels is None:
        panels = int(math.ceil(R * top / math.pi)) + 8
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(0.0, R, panels + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + 0.5 * h[:, None] * (gx[None, :] + 1.0)).ravel()
    wx = (0.5 * h[:, None] * gw[None, :]).ravel()
    p = synthesize_kernel(w, power, x, ds)
    return 2.0 * (np.cos(np.multiply.outer(lam, x)) * (p * wx)).sum(axis=-1)


def offband_sup(w: SpectralWindow, beta: float, lam_grid) -> float:
    """sup |p_t^(lam)| over lam in lam_grid outside [t - beta/2, t + beta/2]."""
    lam_grid = np.asarray(lam_grid, dtype=float)
    mask = np.abs(np.abs(lam_grid) - w.t) >= beta / 2.0
    vals = np.abs(pt_fourier(w, lam_grid[mask]))
    return float(vals.max())


# --- asymptotics -------------------------------------------------------------

@dataclass
class AsymptoticFit:
    s: np.ndarray
    xs: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    residual: np.ndarray  # shape (len(s), len(xs))

    def scaled_residual(self) -> np.ndarray:
        return np.abs(self.residual) * np.multiply.outer(self.s, self.xs) ** 1.5


def asymptotic_decompose(s_values, xs, max_cond: float = 1e8) -> AsymptoticFit:
    """Fit phi_s(a(x)) ~ c1 e^{isx}(sx)^{-1/2} + c2 e^{-isx}(sx)^{-1/2} over an s-sweep, per x."""
    s = np.asarray(s_values, dtype=float)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if len(s) < 2:
        raise FitDegenerate("need at least two s values")
    c1, c2, res = [], [], []
    for x in xs:
        phi = np.array([spherical_phi(sv, x).real for sv in s])
        amp = (s * x) ** -0.5
        X = np.stack([amp * np.exp(1j * s * x), amp * np.exp(-1j * s * x)], axis=1)
        if np.linalg.cond(X) > max_cond:
            raise FitDegenerate(f"design matrix ill-conditioned at x={x}")
        coef, *_ = np.linalg.lstsq(X, phi.astype(complex), rcond=None)
        c1.append(coef[0])
        c2.append(coef[1])
        res.append(phi - X @ coef)
    return AsymptoticFit(s, xs, np.array(c1), np.array(c2), np.array(res).T)


def plane_wave_two_point(s: float, z, w, n: int | None = None) -> complex:
    """phi_s at the pair (z, w) through the plane-wave integral based at w.

    Uses (1/2pi) int exp((1/2 - is)(A(k z) - A(k w))) e^{A(k w)} dt with z, w
    given as group elements (2x2); should equal phi_s(a(d(z i, w i))).
    """
    from .group_geometry import A_height, k_mat, mobius, hyp_dist

    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    d = float(hyp_dist(mobius(z, 1j), mobius(w, 1j)))
    if n is None:
        n = 4 * theta_nodes(abs(s), d + 1.0)
    th = 2.0 * math.pi * np.arange(n) / n
    K = k_mat(th)
    Az = A_height(K @ z)
    Aw = A_height(K @ w)
    return complex(np.mean(np.exp((0.5 - 1j * s) * (Az - Aw) + Aw)))
