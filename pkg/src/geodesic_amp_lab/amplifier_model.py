"""Exponent bookkeeping for amplified period and restriction bounds.

Every quantity is a monomial t^a N^b beta^c and is stored by its exponent
vector.  A model is a list of cost terms; the bound is the largest term,
minimised over the free exponents (log_t N, log_t beta) subject to linear
constraints.  This is a small linear program, solved exactly over the
rationals by enumerating vertices.

Exponents that are not optimised (beta in the on-spectrum bound, say) stay
symbolic: the optimum is returned as an affine function of them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InvalidTheta, UnboundedModel

F = Fraction
VARS = ("N", "beta")
ARTIFICIAL_BOX = F(10 ** 6)


def _f(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# --- affine forms in the exponents --------------------------------------------

@dataclass(frozen=True)
class Monomial:
    """t^t N^N beta^beta, by exponents."""

    t: Fraction = F(0)
    N: Fraction = F(0)
    beta: Fraction = F(0)
    label: str = ""

    def __post_init__(self):
        for k in ("t", "N", "beta"):
            object.__setattr__(self, k, _f(getattr(self, k)))

    def coef(self, v: str) -> Fraction:
        return getattr(self, v)

    def __mul__(self, other: Monomial) -> Monomial:
        return Monomial(self.t + other.t, self.N + other.N, self.beta + other.beta,
                        self.label or other.label)

    def value(self, t: float, N: float = 1.0, beta: float = 1.0) -> float:
        return t ** float(self.t) * N ** float(self.N) * beta ** float(self.beta)

    def exponent_at(self, point: dict) -> Fraction:
        return self.t + sum(self.coef(v) * point.get(v, F(0)) for v in VARS)

    def with_label(self, label: str) -> Monomial:
        return Monomial(self.t, self.N, self.beta, label)

    def __str__(self):
        parts = []
        for k in ("t", "N", "beta"):
            e = getattr(self, k)
            if e:
                parts.append(f"{k}^{e}")
        return " ".join(parts) or "1"


@dataclass(frozen=True)
class Constraint:
    """c + a_N log N + a_beta log beta >= 0 (logs base t)."""

    c: Fraction
    N: Fraction = F(0)
    beta: Fraction = F(0)
    label: str = ""

    def __post_init__(self):
        for k in ("c", "N", "beta"):
            object.__setattr__(self, k, _f(getattr(self, k)))

    def coef(self, v: str) -> Fraction:
        return getattr(self, v)


def at_least(var: str, value, label: str = "") -> Constraint:
    return Constraint(-_f(value), **{var: F(1)}, label=label or f"{var} >= t^{value}")


def at_most(var: str, value, label: str = "") -> Constraint:
    return Constraint(_f(value), **{var: F(-1)}, label=label or f"{var} <= t^{value}")


@dataclass
class ExponentModel:
    terms: list
    free: tuple = ("N",)
    constraints: list = field(default_factory=list)
    squared: bool = True          # terms bound the squared quantity
    theta: Fraction | None = None
    rich: bool = False            # eigenvalue-richness assumption in force
    name: str = ""

    def __post_init__(self):
        for v in self.free:
            if v not in VARS:
                raise ValueError(f"unknown variable {v!r}")

    @property
    def params(self) -> tuple:
        used = {v for m in self.terms for v in VARS if m.coef(v)}
        used |= {v for c in self.constraints for v in VARS if c.coef(v)}
        return tuple(v for v in VARS if v in used and v not in self.free)


@dataclass
class Affine:
    """c0 + sum c_v v, v over parameter exponents."""

    const: Fraction
    coefs: dict = field(default_factory=dict)

    def at(self, point: dict) -> Fraction:
        return self.const + sum(c * point[v] for v, c in self.coefs.items())

    def half(self) -> Affine:
        return Affine(self.const / 2, {v: c / 2 for v, c in self.coefs.items()})

    def coef(self, v: str) -> Fraction:
        return self.coefs.get(v, F(0))

    def __str__(self):
        s = f"t^{self.const}"
        for v, c in self.coefs.items():
            if c:
                s += f" {v}^{c}"
        return s


@dataclass
class OptimizationResult:
    choice: dict        # free var -> Affine exponent (in log_t)
    value: Affine       # exponent of the largest term at the optimum
    bound: Affine       # value, or value/2 for squared models
    active: list        # labels of balanced terms
    active_constraints: list

    def exponent(self, var: str) -> Fraction:
        return self.choice[var].const


# --- exact LP -----------------------------------------------------------------

def _solve(A: list, b: list) -> list | None:
    """Gauss-Jordan over Fractions; None when singular."""
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [x / p for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _rows(model: ExponentModel, pvals: dict):
    """All inequalities as (coef over free vars + z, rhs, kind, label): row.x >= rhs."""
    free = list(model.free)
    rows = []
    for m in model.terms:
        # z - sum m_v v >= m_t + sum m_p p
        row = [-m.coef(v) for v in free] + [F(1)]
        rhs = m.t + sum(m.coef(p) * pvals[p] for p in pvals)
        rows.append((row, rhs, "term", m.label or str(m)))
    for c in model.constraints:
        row = [c.coef(v) for v in free] + [F(0)]
        rhs = -(c.c + sum(c.coef(p) * pvals[p] for p in pvals))
        rows.append((row, rhs, "constraint", c.label))
    for i, v in enumerate(free):
        e = [F(0)] * (len(free) + 1)
        e[i] = F(1)
        rows.append((e, -ARTIFICIAL_BOX, "box", f"{v} lower box"))
        rows.append(([-x for x in e], -ARTIFICIAL_BOX, "box", f"{v} upper box"))
    return rows


def _vertex_optimum(model: ExponentModel, pvals: dict):
    rows = _rows(model, pvals)
    k = len(model.free) + 1
    best = None
    for combo in itertools.combinations(range(len(rows)), k):
        x = _solve([rows[i][0] for i in combo], [rows[i][1] for i in combo])
        if x is None:
            continue
        if all(sum(a * xi for a, xi in zip(r[0], x)) >= r[1] for r in rows):
            key = (x[-1], sum(rows[i][2] == "box" for i in combo))
            if best is None or key < best[0]:
                best = (key, x, combo)
    if best is None:
        raise UnboundedModel("no feasible vertex")
    (z, nbox), x, combo = best
    if nbox:
        raise UnboundedModel("optimum escapes to infinity")
    return x, combo, rows


def optimize_exponents(model: ExponentModel) -> OptimizationResult:
    """Minimise the largest term; parameters stay symbolic (affine result)."""
    if len(model.terms) < 1 or (model.free and len(model.terms) < 2):
        raise UnboundedModel("need at least two terms to balance")
    params = model.params
    # a generic point in parameter space picks the active set
    p0 = {p: F(1, 97) * (i + 1) for i, p in enumerate(params)}
    x0, combo, rows = _vertex_optimum(model, p0)
    free = list(model.free)
    k = len(free) + 1
    A = [rows[i][0] for i in combo]

    def solve_rhs(pvals):
        r = _rows(model, pvals)
        return _solve(A, [r[i][1] for i in combo])

    zero = {p: F(0) for p in params}
    base = solve_rhs(zero)
    slopes = {}
    for p in params:
        unit = dict(zero)
        unit[p] = F(1)
        sol = solve_rhs(unit)
        slopes[p] = [s - b for s, b in zip(sol, base)]
    aff = [Affine(base[j], {p: slopes[p][j] for p in params}) for j in range(k)]
    assert [a.at(p0) for a in aff] == x0
    choice = {v: aff[i] for i, v in enumerate(free)}
    value = aff[-1]
    point = {v: x0[i] for i, v in enumerate(free)}
    point.update(p0)
    active = [m.label or str(m) for m in model.terms if m.exponent_at(point) == x0[-1]]
    act_c = [rows[i][3] for i in combo if rows[i][2] == "constraint"]
    return OptimizationResult(choice, value, value.half() if model.squared else value, active, act_c)


def max_term_exponent(model: ExponentModel, point: dict) -> Fraction:
    return max(m.exponent_at(point) for m in model.terms)


def evaluate_fixed(model: ExponentModel) -> Affine:
    """A model with no free variable and one term: its exponent (halved when squared)."""
    if model.free or len(model.terms) != 1:
        raise ValueError("evaluate_fixed needs one term and no free variable")
    m = model.terms[0]
    a = Affine(m.t, {p: m.coef(p) for p in VARS if m.coef(p)})
    return a.half() if model.squared else a


# --- the amplification ledger -------------------------------------------------

# standard amplifier of length N (Hecke operators at primes p and p^2 up to N):
# sum |a_n|^2 ~ N^{1/2}, (sum |a_n|)^2 ~ N, amplified eigenvalue squared ~ N.
AMP_L2 = F(1, 2)
AMP_L1SQ = F(1)
AMP_GAIN_SQ = F(1)


def amplified_terms(diagonal: Monomial, off_diagonal: Monomial) -> list:
    """Squared-bound terms from  <., TT* A .> << D sum|a|^2 + O N (sum|a|)^2."""
    d = diagonal * Monomial(N=AMP_L2 - AMP_GAIN_SQ)
    o = off_diagonal * Monomial(N=1 + AMP_L1SQ - AMP_GAIN_SQ)
    return [d.with_label("diagonal"), o.with_label("off-diagonal")]


def period_a_model() -> ExponentModel:
    """lambda = 0: diagonal 1, off-diagonal t^{-1/2}."""
    return ExponentModel(amplified_terms(Monomial(), Monomial(t=F(-1, 2))),
                         constraints=[at_least("N", 0)], name="period-a")


def period_b_model() -> ExponentModel:
    """lambda/t in [delta, 1 - delta]: off-diagonal t^{-1/3}."""
    return ExponentModel(amplified_terms(Monomial(), Monomial(t=F(-1, 3))),
                         constraints=[at_least("N", 0)], name="period-b")


def onspec_model() -> ExponentModel:
    """Frequency band of width beta at t: diagonal t^{1/2}, off-diagonal t^{1/4} beta^{1/4}."""
    return ExponentModel(amplified_terms(Monomial(t=F(1, 2)), Monomial(t=F(1, 4), beta=F(1, 4))),
                         constraints=[at_least("N", 0)], name="onspec")


def offspec_model() -> ExponentModel:
    """Local bound off the band: sup |p_t^| << t^{1/2} beta^{-1/2} (squared norm)."""
    return ExponentModel([Monomial(t=F(1, 2), beta=F(-1, 2), label="off-spectrum")],
                         free=(), name="offspec")


def main_model() -> ExponentModel:
    """On-spectrum (N optimised) against off-spectrum, beta free in [1, t^{2/3}]."""
    terms = onspec_model().terms + offspec_model().terms
    cons = [at_least("N", 0), at_least("beta", 0), at_most("beta", F(2, 3))]
    return ExponentModel(terms, free=("N", "beta"), constraints=cons, name="main")


def _check_theta(theta) -> Fraction:
    theta = _f(theta)
    if not 0 <= theta < F(1, 2):
        raise InvalidTheta(f"theta={theta} outside [0, 1/2)")
    return theta


def conditional_band_model(theta) -> ExponentModel:
    """Spectral Hecke-return model: N t^{1/2} + N^{3+2 theta} t^{-1/2} beta, gain N^2.

    The amplifier must be long enough for the spectral count: N >= (t/beta)^{1/2}.
    """
    theta = _check_theta(theta)
    gain = Monomial(N=-2)
    terms = [(Monomial(t=F(1, 2), N=1) * gain).with_label("diagonal"),
             (Monomial(t=F(-1, 2), N=3 + 2 * theta, beta=1) * gain).with_label("off-diagonal")]
    cons = [Constraint(F(-1, 2), N=1, beta=F(1, 2), label="N >= (t/beta)^{1/2}")]
    return ExponentModel(terms, free=("N",), constraints=cons, theta=theta, rich=True,
                         name=f"conditional-band({theta})")


def conditional_model(theta) -> ExponentModel:
    """Band bound (after the N choice) against the off-spectrum bound, beta free."""
    band = optimize_exponents(conditional_band_model(theta)).value
    band_term = Monomial(t=band.const, beta=band.coef("beta"), label="band")
    terms = [band_term] + offspec_model().terms
    cons = [at_least("beta", 0), at_most("beta", F(2, 3))]
    return ExponentModel(terms, free=("beta",), constraints=cons, theta=_f(theta), rich=True,
                         name=f"conditional({_f(theta)})")


@dataclass
class ConditionalExponents:
    theta: Fraction
    l2: Fraction              # ||psi|_l||_2 << t^{l2}
    beta_choice: Fraction     # beta = t^{beta_choice}
    period_t: Fraction        # <psi, b e^{i lam x}> << t^{period_t} beta^{period_beta}
    period_beta: Fraction


def conditional_exponents(theta) -> ConditionalExponents:
    theta = _check_theta(theta)
    band = optimize_exponents(conditional_band_model(theta))
    res = optimize_exponents(conditional_model(theta))
    return ConditionalExponents(theta, res.bound.const, res.exponent("beta"),
                                band.bound.const, band.bound.coef("beta"))


PRESETS = {
    "period-a": period_a_model,
    "period-b": period_b_model,
    "onspec": onspec_model,
    "offspec": offspec_model,
    "main": main_model,
}


def preset(name: str) -> ExponentModel:
    if name.startswith("conditional"):
        arg = name[len("conditional"):].strip("()= ")
        return conditional_model(F(arg) if arg else F(7, 64))
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)} or conditional(theta)")


def solve_preset(name: str) -> OptimizationResult | Affine:
    m = preset(name)
    return evaluate_fixed(m) if not m.free else optimize_exponents(m)


def is_strict_optimum(model: ExponentModel, res: OptimizationResult, var: str = "N",
                      step: Fraction = F(1, 1000)) -> bool:
    """Perturbing the chosen exponent of var by +-step raises the largest term."""
    p0 = {p: F(1, 97) * (i + 1) for i, p in enumerate(model.params)}
    point = {v: res.choice[v].at(p0) for v in model.free}
    point.update(p0)
    best = max_term_exponent(model, point)
    out = True
    for d in (step, -step):
        q = dict(point)
        q[var] = q[var] + d
        out &= max_term_exponent(model, q) > best
    return out
