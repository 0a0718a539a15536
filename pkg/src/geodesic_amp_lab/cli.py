"""geodesic-amp-lab command line.

    geodesic-amp-lab <subcommand> --config FILE.toml [--out DIR] [--seed N] [--threads K]

Every run writes its tables into DIR together with `<subcommand>.manifest.json`
(config hash, seed, library versions, wall time).  CSV files end with a
comment line naming that manifest.  Exit codes: 2 invalid config, 3 budget
exceeded, 4 accuracy not reached.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .amplifier_model import (
    Affine, OptimizationResult, evaluate_fixed, optimize_exponents, preset, PRESETS,
)
from .errors import ConfigInvalid, GeodesicAmpError
from .group_geometry import GeodesicSegment, GroupElement, lie_exp, n_align_element
from .hecke_counting import KAPPA_GRID, count_n, default_segment
from .oscillatory_quadrature import (
    BumpProfile, DecaySeries, fit_decay, restriction_integral, smooth_theta_window,
)
from .phase_critical import (
    PhaseContext, classify_degeneracy, config_from_critical_point, find_critical_points,
    hessian_analytic, hessian_numeric,
)
from .quaternion_orders import OrderBasis, default_order
from .spherical_kernels import SpectralWindow, synthesize_profile
from .svgplot import loglog_svg

SUBCOMMANDS = ("kernel-profile", "critical-points", "decay-fit", "hecke-count", "exponent-opt", "selftest")


# --- config helpers -----------------------------------------------------------

def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, cfg)
    if not isinstance(sec, dict):
        raise ConfigInvalid(f"[{name}] must be a table")
    return sec


def _num(sec: dict, key: str, default=None, kind=float):
    if key not in sec:
        if default is None:
            raise ConfigInvalid(f"missing required key {key!r}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(f"{key!r} must be a number")
    v = kind(v)
    if not math.isfinite(v):
        raise ConfigInvalid(f"{key!r} must be finite")
    return v


def _grid(spec, name: str) -> np.ndarray:
    """A list of numbers, or {start, stop, num[, geometric]}."""
    if isinstance(spec, list):
        vals = np.array([float(v) for v in spec])
    elif isinstance(spec, dict):
        start, stop = _num(spec, "start"), _num(spec, "stop")
        num = _num(spec, "num", kind=int)
        if num < 1:
            raise ConfigInvalid(f"{name}: num must be >= 1")
        if spec.get("geometric", False):
            if start <= 0 or stop <= 0:
                raise ConfigInvalid(f"{name}: geometric grid needs positive ends")
            vals = np.geomspace(start, stop, num)
        else:
            vals = np.linspace(start, stop, num)
    else:
        raise ConfigInvalid(f"{name} must be a list or a {{start, stop, num}} table")
    if vals.size == 0:
        raise ConfigInvalid(f"{name} is empty")
    return vals


def _group_element(sec: dict) -> GroupElement:
    """g from `g = [a, b, c, d]`, `lie = [X00, X01, X10]` or a [critical_point] table."""
    if "g" in sec:
        v = sec["g"]
        if not isinstance(v, list) or len(v) != 4:
            raise ConfigInvalid("g must be four reals [a, b, c, d]")
        m = np.array(v, dtype=float).reshape(2, 2)
        if abs(np.linalg.det(m) - 1) > 1e-9:
            raise ConfigInvalid(f"det g = {np.linalg.det(m)} != 1")
        return GroupElement(m)
    if "lie" in sec:
        v = sec["lie"]
        if not isinstance(v, list) or len(v) != 3:
            raise ConfigInvalid("lie must be three reals [X00, X01, X10]")
        X = np.array([[v[0], v[1]], [v[2], -v[0]]], dtype=float)
        return GroupElement(lie_exp(X))
    if "critical_point" in sec:
        c = sec["critical_point"]
        g, _ = config_from_critical_point(_num(c, "rho"), _num(c, "x1"), _num(c, "x2"), _num(c, "h"),
                                          int(_num(c, "sign2", 1)))
        return g
    raise ConfigInvalid("geometry needs one of g, lie or critical_point")


def _bump(spec) -> BumpProfile:
    if spec is None:
        return BumpProfile()
    if isinstance(spec, str):
        return BumpProfile(spec)
    return BumpProfile(spec.get("kind", "poly-smooth"), float(spec.get("scale", 1.0)))


def _config_hash(sub: str, cfg: dict, seed: int) -> str:
    blob = json.dumps({"subcommand": sub, "config": cfg, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


# --- output sink --------------------------------------------------------------

class Sink:
    """Serialises every write of one run and produces its manifest."""

    def __init__(self, out: Path, sub: str, cfg: dict, seed: int, threads: int):
        self.out, self.sub, self.cfg, self.seed, self.threads = out, sub, cfg, seed, threads
        self.hash = _config_hash(sub, cfg, seed)
        self.files: list[str] = []
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    @property
    def manifest_name(self) -> str:
        return f"{self.sub}.manifest.json"

    def csv(self, name: str, header: list, rows) -> Path:
        p = self.out / name
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
            fh.write(f"# manifest: {self.manifest_name} config_sha256={self.hash}\r\n")
        self.files.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        p = self.out / name
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")
        self.files.append(name)
        return p

    def text(self, name: str, body: str) -> Path:
        p = self.out / name
        p.write_text(body)
        self.files.append(name)
        return p

    def finish(self, status: str = "ok", extra: dict | None = None) -> None:
        man = {
            "subcommand": self.sub,
            "config_sha256": self.hash,
            "config": self.cfg,
            "seed": self.seed,
            "threads": self.threads,
            "status": status,
            "outputs": self.files,
            "versions": {"geodesic_amp_lab": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
        }
        if extra:
            man.update(extra)
        (self.out / self.manifest_name).write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return v


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --- subcommands --------------------------------------------------------------

def run_kernel_profile(cfg: dict, sink: Sink, args) -> int:
    sec = _section(cfg, "kernel")
    t = _num(sec, "t")
    if t <= 0:
        raise ConfigInvalid("t must be positive")
    w = SpectralWindow(t, _num(sec, "eps", 0.03), _num(sec, "M", 8, int))
    power = _num(sec, "power", 2, int)
    if power not in (1, 2):
        raise ConfigInvalid("power must be 1 or 2")
    xs = _grid(sec.get("x", {"start": 0.0, "stop": 1.5, "num": 151}), "x")
    if np.any(np.abs(xs) > 2):
        raise ConfigInvalid("|x| <= 2 required")
    chunks = np.array_split(xs, max(1, min(args.threads, xs.size)))
    profs = _pmap(lambda c: synthesize_profile(w, power, c), chunks, args.threads)
    vals = np.concatenate([p.values for p in profs])
    norm = np.abs(vals) * np.sqrt(1 + t * np.abs(xs)) / t
    sink.csv("kernel_profile.csv", ["x", "k_t", "p_t_normalized"], zip(xs, vals, norm))
    sink.finish(extra={"tail_bound": profs[0].tail_bound})
    print(f"kernel-profile t={t}: {xs.size} points, sup normalized = {float(norm.max()):.6g}")
    return 0


def run_critical_points(cfg: dict, sink: Sink, args) -> int:
    sec = _section(cfg, "critical")
    g = _group_element(sec)
    ctx = PhaseContext(g, _num(sec, "rho"), _num(sec, "delta", 0.05))
    label = classify_degeneracy(ctx)
    rows = []
    for cp in find_critical_points(ctx):
        _, det_a = hessian_analytic(cp, ctx)
        det_n = float(np.linalg.det(hessian_numeric(cp, ctx)))
        cls = "degenerate" if cp.degenerate else label.kind
        rows.append((cp.theta, cp.x1, cp.x2, cp.h, cp.kappa, det_a, det_n, cls))
    sink.csv("critical_points.csv", ["theta'", "x1'", "x2'", "h", "kappa", "detD_analytic", "detD_numeric",
                                     "class"], rows)
    sink.finish(extra={"classification": label.kind})
    print(f"critical-points: {len(rows)} found, configuration {label.kind}")
    return 0


def run_decay_fit(cfg: dict, sink: Sink, args) -> int:
    geo = _section(cfg, "geometry")
    sec = _section(cfg, "decay")
    g = _group_element(geo)
    s_vals = _grid(sec.get("s", {"start": 100.0, "stop": 1600.0, "num": 9, "geometric": True}), "s")
    rule = sec.get("lambda_rule", "ratio")
    rho = _num(sec, "rho", 0.0)
    if rule == "zero":
        lam = lambda s: 0.0
    elif rule == "ratio":
        lam = lambda s: rho * s
    else:
        raise ConfigInvalid("lambda_rule must be 'zero' or 'ratio'")
    model = sec.get("model", "pure-power")
    if model not in ("pure-power", "power-times-(1+sn)^{-1/2}"):
        raise ConfigInvalid(f"unknown model {model!r}")
    b1 = _bump(sec.get("bump1", sec.get("bump")))
    b2 = _bump(sec.get("bump2", sec.get("bump")))
    win = None
    if "theta_window" in sec:
        tw = sec["theta_window"]
        center = tw.get("center", 0.0)
        if center == "d2-witness":
            lab = classify_degeneracy(PhaseContext(g, rho if rho else 0.5))
            if lab.witness is None:
                raise ConfigInvalid("d2-witness requested but g is not a D2 configuration")
            center = lab.witness
        win = smooth_theta_window(float(center), _num(tw, "half_width"))
    n_spec = sec.get("n", "auto")
    n = n_align_element(g.m)[0] if n_spec == "auto" else float(n_spec)
    tol = _num(sec, "tol", 1e-6)

    def one(s):
        return restriction_integral(float(s), lam(float(s)), g, b1, b2, tol=tol, theta_window=win).value

    vals = np.array(_pmap(one, list(s_vals), args.threads))
    sink.csv("decay.csv", ["s", "reI", "imI", "absI"], zip(s_vals, vals.real, vals.imag, np.abs(vals)))
    fit = fit_decay(DecaySeries(s_vals, vals, n), model)
    summary = {"model": model, "slope": fit.slope, "stderr": fit.stderr, "intercept": fit.intercept,
               "residual_rms": fit.residual_rms, "n_align": n, "points": int(s_vals.size)}
    sink.json("decay_fit.json", summary)
    y = np.abs(vals)
    if model != "pure-power":
        y = y * np.sqrt(1 + s_vals * n)
    sink.text("decay.svg", loglog_svg(s_vals, y, f"decay fit ({model})", (fit.slope, fit.intercept)))
    sink.finish(extra={"slope": fit.slope})
    print(f"decay-fit: slope {fit.slope:.4f} +- {fit.stderr:.2g} ({model})")
    return 0


def _segment(sec: dict) -> GeodesicSegment:
    if "base" not in sec:
        return default_segment() if "length" not in sec else GeodesicSegment(default_segment().base,
                                                                            _num(sec, "length"))
    return GeodesicSegment(_group_element({"g": sec["base"]}), _num(sec, "length", 1.0))


def run_hecke_count(cfg: dict, sink: Sink, args) -> int:
    sec = _section(cfg, "hecke")
    kappas = sec.get("kappas", list(KAPPA_GRID))
    if not isinstance(kappas, list) or not kappas:
        raise ConfigInvalid("kappas must be a non-empty list")
    order = sec.get("order", "default")
    R = default_order() if order == "default" else OrderBasis.from_toml(Path(order))
    n_min, n_max = _num(sec, "n_min", 1, int), _num(sec, "n_max", kind=int)
    if not 1 <= n_min <= n_max:
        raise ConfigInvalid("need 1 <= n_min <= n_max")
    coprime = bool(sec.get("coprime_only", True))
    seg = _segment(_section(cfg, "geodesic") if "geodesic" in cfg else {})
    ns = [n for n in range(n_min, n_max + 1) if not coprime or math.gcd(n, R.q) == 1]
    if not ns:
        raise ConfigInvalid("no admissible n in range")
    counts = _pmap(lambda n: count_n(seg, n, R, kappas), ns, args.threads)
    rows = [(r.n, r.kappa, r.count, r.bound, r.ratio) for nc in counts for r in nc.records]
    sink.csv("hecke_count.csv", ["n", "kappa", "M", "bound", "ratio"], rows)
    false_rej = sum(nc.false_rejections for nc in counts)
    max_ratio = max(r[4] for r in rows)
    sink.json("hecke_summary.json", {"max_ratio": max_ratio, "false_rejections": false_rej,
                                     "n_values": len(ns), "q": R.q})
    sink.finish()
    print(f"hecke-count: {len(ns)} values of n, max M/bound = {max_ratio:.4g}, "
          f"prefilter false rejections = {false_rej}")
    return 0


def _term_exponent(term, res: OptimizationResult | None, params) -> Affine:
    const = term.t
    coefs = {p: Fraction(0) for p in params}
    for v in ("N", "beta"):
        c = term.coef(v)
        if not c:
            continue
        if res is not None and v in res.choice:
            a = res.choice[v]
            const += c * a.const
            for p, q in a.coefs.items():
                coefs[p] = coefs.get(p, Fraction(0)) + c * q
        else:
            coefs[v] = coefs.get(v, Fraction(0)) + c
    return Affine(const, {p: q for p, q in coefs.items() if q})


def exponent_table(name: str) -> tuple[list[str], str]:
    m = preset(name)
    lines = [f"model {m.name}" + (" (squared norm; bound is half the largest term)" if m.squared else "")]
    if m.free:
        res = optimize_exponents(m)
        for v in m.free:
            lines.append(f"  choose {v} = {res.choice[v]}")
        bound = res.bound
        active = set(res.active)
    else:
        res, bound, active = None, evaluate_fixed(m), {str(t.label) for t in m.terms}
    lines.append(f"  {'term':<16}{'exponent at optimum':<28}balanced")
    for term in m.terms:
        e = _term_exponent(term, res, m.params)
        lab = term.label or str(term)
        lines.append(f"  {lab:<16}{str(e):<28}{'yes' if (lab in active or str(term) in active) else 'no'}")
    final = str(bound.const) if not bound.coefs else str(bound)
    lines.append(f"  bound exponent: {final}")
    return lines, final


def run_exponent_opt(cfg: dict, sink: Sink | None, args) -> int:
    name = args.preset or _section(cfg, "exponent").get("preset")
    if not name:
        raise ConfigInvalid(f"no preset given; choose from {sorted(PRESETS)} or conditional(theta)")
    try:
        lines, final = exponent_table(name)
    except ValueError as e:
        raise ConfigInvalid(str(e)) from e
    print("\n".join(lines))
    print(final)
    if sink is not None:
        sink.json("exponent_opt.json", {"preset": name, "table": lines, "bound": final})
        sink.finish()
    return 0


def run_selftest(cfg: dict, sink: Sink | None, args) -> int:
    from .hecke_counting import amplifier_sums, amplifier_sums_direct
    from .quaternion_orders import coset_reps, sigma1
    from .spherical_kernels import spherical_phi

    rng = np.random.default_rng(args.seed)
    R = default_order()
    checks = []
    checks.append(("coset counts m <= 13",
                   all(len(coset_reps(R, m)) == sigma1(m) for m in range(1, 14) if math.gcd(m, R.q) == 1)))
    checks.append(("phi_s(0) = 1", abs(spherical_phi(20.0, 0.0) - 1) < 1e-12))
    checks.append(("main exponent 3/14", exponent_table("main")[1] == "3/14"))
    alpha = rng.normal(size=40) + 1j * rng.normal(size=40)
    a, b = amplifier_sums(alpha), amplifier_sums_direct(alpha)
    checks.append(("divisor sums agree", np.allclose(a, b, rtol=1e-12)))
    g, _ = config_from_critical_point(0.4, 0.3, -0.2, 0.7, 1)
    ctx = PhaseContext(g, 0.4)
    ok = True
    for cp in find_critical_points(ctx):
        D, _ = hessian_analytic(cp, ctx)
        ok &= bool(np.max(np.abs(D - hessian_numeric(cp, ctx))) < 1e-6 * max(1.0, np.max(np.abs(D))))
    checks.append(("Hessian analytic vs finite differences", ok))
    for label, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {label}")
    good = all(p for _, p in checks)
    if sink is not None:
        sink.json("selftest.json", {label: bool(p) for label, p in checks})
        sink.finish(status="ok" if good else "failed")
    return 0 if good else 1


RUNNERS = {
    "kernel-profile": run_kernel_profile,
    "critical-points": run_critical_points,
    "decay-fit": run_decay_fit,
    "hecke-count": run_hecke_count,
    "exponent-opt": run_exponent_opt,
    "selftest": run_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geodesic-amp-lab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        needs_cfg = name not in ("exponent-opt", "selftest")
        sp.add_argument("--config", required=needs_cfg, help="TOML experiment spec")
        sp.add_argument("--out", default=None, help="output directory (default: ./out/<subcommand>)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        if name == "exponent-opt":
            sp.add_argument("preset", nargs="?", help="period-a, period-b, onspec, offspec, main, conditional(theta)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "preset", None) is None:
        args.preset = None
    try:
        cfg = {}
        if args.config:
            try:
                with open(args.config, "rb") as fh:
                    cfg = tomllib.load(fh)
            except FileNotFoundError as e:
                raise ConfigInvalid(f"config file not found: {args.config}") from e
            except tomllib.TOMLDecodeError as e:
                raise ConfigInvalid(f"config is not valid TOML: {e}") from e
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        sink = None
        if args.config or args.out:
            out = Path(args.out) if args.out else Path("out") / args.subcommand
            sink = Sink(out, args.subcommand, cfg, args.seed, args.threads)
        return RUNNERS[args.subcommand](cfg, sink, args)
    except GeodesicAmpError as e:
        print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
