"""Variable-exponent family A(x, t) = t^{p(x)} with closed-form conjugates and controls."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .control import check_growth_condition, hat, piecewise_power
from .cube import Cube, dyadic_cubes
from .errors import ConditionError
from .nfunction import (ConditionReport, NFun, Verdict, power_px, sobolev_conjugate,
                        upper_conjugate, young_conjugate)

KINDS = ("constant", "smooth", "log_holder", "jump")


def _oversampled_points(Q, base=16):
    """Closed lattice of Q with 2x the base resolution per side (corners included)."""
    n = Q.dim
    k = 2 * base + 1 if n <= 2 else base + 1
    axes = [np.linspace(Q.lo[a], Q.hi[a], k) for a in range(n)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


@dataclass(frozen=True, eq=False)
class PField:
    """Exponent field p(x) on ``domain``.

    constant:   p0
    smooth:     p0 + amplitude sin(2 pi frequency x_1)
    log_holder: p0 + amplitude / log(e / |x_1 - centre|), a cusp that is log-Hoelder but not Lipschitz
    jump:       p0, plus ``jump`` where x_1 >= ``jump_at``
    ``func`` overrides the formula with any vectorized callable.
    """

    kind: str
    n: int
    p0: float = 2.5
    amplitude: float = 0.0
    frequency: float = 1.0
    jump: float = 0.0
    jump_at: float = 1.0 / 3.0
    L_target: float | None = None
    domain: Cube | None = None
    func: Callable | None = None
    q: float | None = None
    bounds: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.domain is None:
            object.__setattr__(self, "domain", Cube.unit(self.n))
        pts = _oversampled_points(self.domain, 32)
        vals = self(pts)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        object.__setattr__(self, "bounds", (lo, hi))
        q = lo if self.q is None else float(self.q)
        if self.n < 2 or not q > self.n / (self.n - 1):
            raise ConditionError(f"need q > n/(n-1) (q={q:g}, n={self.n})")
        if q > lo:
            raise ConditionError(f"sampled p dips to {lo:g}, below q={q:g}")
        if self.kind == "log_holder" and self.L_target is not None:
            L = log_holder_modulus(self, depths=()).L
            if L > self.L_target * (1 + 1e-9):
                raise ConditionError(f"sampled log-Hoelder modulus {L:g} exceeds L={self.L_target:g}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(x), dtype=float) * np.ones(x.shape[:-1])
        x1 = x[..., 0]
        if self.kind == "constant":
            return np.full(x.shape[:-1], float(self.p0))
        if self.kind == "smooth":
            return self.p0 + self.amplitude * np.sin(2 * np.pi * self.frequency * x1)
        if self.kind == "log_holder":
            amp = self.amplitude if self.L_target is None else self.L_target
            c = float(self.domain.center[0])
            d = np.abs(x1 - c)
            with np.errstate(divide="ignore"):
                return self.p0 + np.where(d > 0, amp / np.log(np.e / np.maximum(d, 1e-300)), 0.0)
        return self.p0 + self.jump * (x1 >= self.jump_at)

    @property
    def p_minus(self):
        return self.bounds[0]

    @property
    def p_plus(self):
        return self.bounds[1]

    def range_on(self, Q, base=16):
        v = self(_oversampled_points(Q, base))
        return float(np.min(v)), float(np.max(v))


def _upper_exp(p, n):
    return n * p / (n + p)


def _sobolev_exp(p, n):
    return n * p / (n - p)


@dataclass
class VarExpBundle:
    p: PField
    n: int
    A: NFun
    upper: NFun
    sobolev: NFun | None
    young: NFun
    controls: dict

    def region_controls(self, Q):
        """Lower controls (of A, of A*) for the exponent range sampled on Q."""
        lo, hi = self.p.range_on(Q)
        n = self.n
        return (piecewise_power(hi, lo, name=f"A[{Q.label()}]", region=Q),
                piecewise_power(_upper_exp(hi, n), _upper_exp(lo, n), name=f"A*[{Q.label()}]", region=Q))

    def region_control(self, Q):
        return self.region_controls(Q)[0]


def make_varexp(p, n=None):
    """Closed forms of A, A*, A_*, the per-x Young conjugate and the six piecewise-power controls."""
    n = p.n if n is None else n
    if n != p.n:
        raise ConditionError("dimension of the exponent field does not match n")
    dom = p.domain
    pm, pp = p.p_minus, p.p_plus
    A = power_px(p, n, dom, name="t^p(x)")

    def up_f(x, t):
        px = p(x)
        return (px * np.asarray(t, dtype=float)) ** _upper_exp(px, n)

    def up_inv(x, s):
        px = p(x)
        return np.asarray(s, dtype=float) ** (1.0 / _upper_exp(px, n)) / px

    def up_d(x, t):
        px = p(x)
        e = _upper_exp(px, n)
        return e * px * (px * np.asarray(t, dtype=float)) ** (e - 1)

    upper = NFun(func=up_f, deriv=up_d, inverse=up_inv, dim=n, domain=dom, name="A*")

    sobolev = None
    if pp < n:
        def sob_f(x, t):
            px = p(x)
            return ((n - px) / (n * px) * np.asarray(t, dtype=float)) ** _sobolev_exp(px, n)

        def sob_inv(x, s):
            px = p(x)
            return np.asarray(s, dtype=float) ** (1.0 / _sobolev_exp(px, n)) * n * px / (n - px)

        sobolev = NFun(func=sob_f, inverse=sob_inv, dim=n, domain=dom, name="A_*")

    def young_f(x, s):
        px = p(x)
        return (px - 1) * (np.asarray(s, dtype=float) / px) ** (px / (px - 1))

    young = NFun(func=young_f, dim=n, domain=dom, name="A~")

    ctrl = {
        "A": piecewise_power(pp, pm, name="A_ctrl"),
        "A*": piecewise_power(_upper_exp(pp, n), _upper_exp(pm, n), name="A*_ctrl"),
    }
    ctrl["A_hat"] = hat(ctrl["A"])
    ctrl["A*_hat"] = hat(ctrl["A*"])
    if sobolev is not None:
        ctrl["A_*"] = piecewise_power(_sobolev_exp(pp, n), _sobolev_exp(pm, n), name="A_*_ctrl")
        ctrl["A_*_hat"] = hat(ctrl["A_*"])
    return VarExpBundle(p, n, A, upper, sobolev, young, ctrl)


def _max_rel(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def closed_form_crosscheck(p, n=None, x_count=5, triples=10_000, seed=0, tol=1e-6):
    """Numeric conjugates vs closed forms, the three sandwiches and the growth classes."""
    B = make_varexp(p, n)
    n = B.n
    rng = np.random.default_rng(seed)
    rep = ConditionReport()
    dom = p.domain
    xs = dom.lo + (dom.hi - dom.lo) * rng.uniform(0.05, 0.95, size=(x_count, n))
    tt = np.geomspace(1e-2, 1e2, 41)

    yc = young_conjugate(B.A)
    err_y = max(_max_rel(yc(x, tt), B.young(x, tt)) for x in xs)
    rep.add(Verdict("young_conjugate", err_y <= tol, {"max_rel_err": err_y}))
    uc = upper_conjugate(B.A)
    err_u = max(_max_rel(uc(x, tt), B.upper(x, tt)) for x in xs)
    rep.add(Verdict("upper_conjugate", err_u <= tol, {"max_rel_err": err_u}))
    if B.sobolev is not None:
        sc = sobolev_conjugate(B.A)
        err_s = max(_max_rel(sc(x, tt), B.sobolev(x, tt)) for x in xs)
        rep.add(Verdict("sobolev_conjugate", err_s <= tol, {"max_rel_err": err_s}))

    X = dom.lo + (dom.hi - dom.lo) * rng.uniform(size=(triples, n))
    al = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), triples))
    T = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), triples))
    fams = [("A", B.A), ("A*", B.upper)] + ([("A_*", B.sobolev)] if B.sobolev is not None else [])
    for key, F in fams:
        base = F(X, T)
        scaled = F(X, al * T)
        lower = B.controls[key](al) * base
        upper = B.controls[key + "_hat"](al) * base
        slack = min(float(np.min((scaled - lower) / scaled)), float(np.min((upper - scaled) / scaled)))
        rep.add(Verdict(f"sandwich_{key}", slack >= -1e-12, {"min_rel_slack": slack}))

    d = check_growth_condition(B.controls["A"], "delta")
    rep.add(Verdict("A_ctrl_in_Delta", d.verdict, {"M0": d.M0, "M1": d.M1, "M2": d.M2}))
    nb = check_growth_condition(B.controls["A*_hat"], "nabla")
    rep.add(Verdict("A*_hat_in_nabla", nb.verdict, {"M0": nb.M0, "M1": nb.M1, "M2": nb.M2}))
    if B.sobolev is not None:
        ns = check_growth_condition(B.controls["A_*_hat"], "nabla")
        rep.add(Verdict("A_*_hat_in_nabla", ns.verdict, {"M0": ns.M0, "M1": ns.M1, "M2": ns.M2}))
    return rep


# ---------------------------------------------------------------- log-Hoelder modulus

@dataclass
class PairPlan:
    points: int = 256
    lattice: int = 64
    starts: int = 8
    scales: np.ndarray = field(default_factory=lambda: np.geomspace(0.999 / np.e, 1e-12, 120))
    refine: bool = True
    seed: int = 0


@dataclass
class LogHolderModulus:
    L: float
    L_by_scale: np.ndarray
    scales: np.ndarray
    growth: float
    verdict: bool
    cube_rows: list
    cube_verdict: bool

    def csv_rows(self):
        return list(zip(map(float, self.scales), map(float, self.L_by_scale)))


def _pairs_at_scale(p, X, r):
    dom = p.domain
    diffs = []
    for k in range(p.n):
        Y = X.copy()
        Y[:, k] += r
        ok = Y[:, k] <= dom.hi[k]
        diffs.append(np.abs(p(X[ok]) - p(Y[ok])))
    d = np.concatenate(diffs) if diffs else np.zeros(0)
    return float(np.max(d)) if d.size else 0.0


def _refined_sup(p, X, scales, starts=8):
    """Follow the worst coarse pairs down the scales, keeping the worse half each time."""
    r0 = scales[0]
    cands = []
    for k in range(p.n):
        Y = X.copy()
        Y[:, k] += r0
        ok = Y[:, k] <= p.domain.hi[k]
        d = np.abs(p(X[ok]) - p(Y[ok]))
        for i in np.argsort(d)[::-1][:starts]:
            cands.append((d[i], X[ok][i].copy(), Y[ok][i].copy()))
    cands.sort(key=lambda c: -c[0])
    out = np.zeros(len(scales))
    for _, a, b in cands[:starts]:
        for j, r in enumerate(scales):
            while np.linalg.norm(b - a) > r * (1 + 1e-12):
                mid = 0.5 * (a + b)
                pa, pm, pb = p(np.stack([a, mid, b]))
                if abs(pa - pm) >= abs(pm - pb):
                    b = mid
                else:
                    a = mid
            out[j] = max(out[j], abs(float(np.diff(p(np.stack([a, b])))[0])))
    return out


def log_holder_modulus(p, plan=None, cap=5.0, growth_limit=1.1, depths=range(1, 7)):
    """Sup of |p(x)-p(y)| log(1/|x-y|) over sampled pairs, scale by scale.

    Verdict: finite below ``cap`` and not still growing (the sup over the
    finest quarter of scales exceeds the previous quarter by at most
    ``growth_limit``). Cube check: diam(Q)^{-(p+ - p-)} <= e^L on dyadic cubes.
    """
    plan = plan or PairPlan()
    rng = np.random.default_rng(plan.seed)
    dom = p.domain
    X = dom.lo + (dom.hi - dom.lo) * rng.uniform(size=(plan.points, p.n))
    if plan.lattice:
        k = plan.lattice if p.n <= 2 else max(4, int(round(4096 ** (1.0 / p.n))))
        axes = [np.linspace(dom.lo[a], dom.hi[a], k + 1) for a in range(p.n)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p.n)
        X = np.concatenate([X, grid])
    scales = np.asarray(plan.scales, dtype=float)
    osc = np.array([_pairs_at_scale(p, X, r) for r in scales])
    if plan.refine:
        osc = np.maximum(osc, _refined_sup(p, X, scales, plan.starts))
    Ls = osc * np.log(1.0 / scales)
    running = np.maximum.accumulate(Ls)
    L = float(running[-1])
    q = max(len(scales) // 4, 1)
    prev = float(np.max(Ls[-2 * q:-q])) if len(scales) >= 2 * q else float(np.max(Ls))
    fine = float(np.max(Ls[-q:]))
    growth = fine / prev if prev > 0 else (1.0 if fine == 0 else np.inf)
    verdict = bool(L <= cap and growth <= growth_limit)

    rows, ok = [], True
    for d in depths:
        for Q in dyadic_cubes(dom, d):
            lo, hi = p.range_on(Q)
            diam = Q.side * np.sqrt(p.n)
            lhs = diam ** (-(hi - lo)) if diam < 1 else 1.0
            good = lhs <= np.exp(L) * (1 + 1e-12)
            ok &= good
            rows.append({"cube": Q.label(), "depth": d, "osc": hi - lo, "lhs": lhs, "verdict": bool(good)})
    return LogHolderModulus(L, Ls, scales, float(growth), verdict, rows, bool(ok))
