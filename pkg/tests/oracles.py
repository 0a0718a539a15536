"""Independent reference values used by several test files."""

import mpmath as mp


def conical_legendre(s: float, r: float, dps: int = 30) -> float:
    """P_{-1/2+is}(cosh r) from the Mehler integral, with mpmath quadrature."""
    with mp.workdps(dps):
        f = lambda u: mp.cos(s * u) / mp.sqrt(mp.cosh(r) - mp.cosh(u))
        pts = mp.linspace(0, r, int(8 + s * r / 3))
        return float(mp.sqrt(2) / mp.pi * mp.quad(f, pts))


def conical_legendre_hyp(s: float, r: float, dps: int = 30) -> float:
    """Same function through mpmath's hypergeometric Legendre P."""
    with mp.workdps(dps):
        return float(mp.re(mp.legenp(-0.5 + 1j * s, 0, mp.cosh(r), type=3)))
