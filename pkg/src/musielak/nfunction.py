"""Generalized N-functions A(x, t) on a cube and their calculus.

An :class:`NFun` is either closed-form (a vectorized callable, optionally with
an analytic derivative and inverse) or derived-numeric: a lazily built,
per-x-sample monotone table on a log-spaced grid, interpolated by PCHIP in
log-log coordinates. Conjugation operations return derived-numeric NFuns.

Shapes: ``x`` has shape (..., n) and ``t`` broadcasts against ``x.shape[:-1]``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._numeric import LogLogTable, gk_panels, invert_increasing
from .cube import Cube
from .errors import ConditionError, DomainError, NumericError, UnsupportedCaseError

TABLE_POINTS = 512
TAU_MIN = 1e-12
COVER = (1e-6, 1e6)


@dataclass(frozen=True, eq=False)
class NFun:
    func: Callable
    dim: int
    domain: Cube
    kind: str = "closed-form"
    name: str = "A"
    deriv: Callable | None = None
    inverse: Callable | None = None
    x_dependent: bool = True
    declared: frozenset = frozenset()
    t_limit: dict = field(default_factory=dict, repr=False)

    def prepare(self, x, t):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.dim:
            raise DomainError(f"point has {x.shape[-1]} coordinates, expected {self.dim}")
        if not np.all(self.domain.contains(x)):
            raise DomainError("point outside the domain of the N-function")
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("A(x, t) is only evaluated at t >= 0; pass |t|")
        return x, t

    def __call__(self, x, t):
        x, t = self.prepare(x, t)
        out = np.asarray(self.func(x, t), dtype=float)
        return np.where(t == 0, 0.0, out)

    def eval(self, x, t):
        return self(x, t)


def eval(A, x, t):  # noqa: A001 - mirrors the operation name
    return A(x, t)


# ---------------------------------------------------------------- tables

class _TableStore:
    """Per-x-sample monotone tables built on demand and cached."""

    def __init__(self, builder, x_dependent):
        self.builder = builder
        self.x_dependent = x_dependent
        self.cache = {}
        self.lock = threading.Lock()

    def table(self, row):
        key = None if not self.x_dependent else row.tobytes()
        with self.lock:
            tab = self.cache.get(key)
        if tab is None:
            tab = self.builder(np.array(row, dtype=float))
            with self.lock:
                self.cache.setdefault(key, tab)
        return tab

    def _apply(self, x, t, method):
        n = x.shape[-1]
        shape = np.broadcast_shapes(x.shape[:-1], t.shape)
        xf = np.broadcast_to(x, shape + (n,)).reshape(-1, n)
        tf = np.broadcast_to(t, shape).ravel()
        out = np.empty(tf.shape)
        if not self.x_dependent or xf.shape[0] == 0:
            tab = self.table(xf[0] if xf.shape[0] else np.zeros(n))
            out[:] = getattr(tab, method)(tf)
            return out.reshape(shape)
        rows, inv = np.unique(xf, axis=0, return_inverse=True)
        inv = inv.ravel()
        for i, row in enumerate(rows):
            sel = inv == i
            out[sel] = getattr(self.table(row), method)(tf[sel])
        return out.reshape(shape)

    def value(self, x, t):
        return self._apply(x, t, "__call__")

    def inverse(self, x, s):
        return self._apply(x, s, "inverse")


def _derived(builder, base, name):
    store = _TableStore(builder, base.x_dependent)
    nf = NFun(func=store.value, dim=base.dim, domain=base.domain, kind="derived-numeric",
              name=name, inverse=store.inverse, x_dependent=base.x_dependent)
    object.__setattr__(nf, "_store", store)
    return nf


# ---------------------------------------------------------------- inversion, derivative

def invert_t(A, x, s, rtol=1e-10, method="auto"):
    """t with A(x, t) = s. Uses the analytic inverse when present unless ``method='bisect'``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("inverse is only taken at s >= 0")
    A.prepare(x, np.zeros(()))
    if method == "auto" and A.inverse is not None:
        out = np.asarray(A.inverse(x, s), dtype=float)
        return np.where(s == 0, 0.0, out)
    shape = np.broadcast_shapes(x.shape[:-1], s.shape)
    xb = np.broadcast_to(x, shape + (A.dim,))
    sb = np.broadcast_to(s, shape).astype(float)
    return invert_increasing(lambda t: A.func(xb, t), sb, rtol=rtol)


def musielak_derivative(A, x, t):
    """Right derivative a(x, t) of A(x, .)."""
    x, t = A.prepare(x, t)
    if A.deriv is not None:
        return np.asarray(A.deriv(x, t), dtype=float)
    h = np.maximum(t, 1.0) * 1e-6
    return (A.func(x, t + h) - A.func(x, t)) / h


def _inverse_fn(A, x):
    if A.inverse is not None:
        return lambda s: np.where(s == 0, 0.0, A.inverse(x, s))
    return lambda s: invert_increasing(lambda t: A.func(x, t), np.asarray(s, dtype=float))


# ---------------------------------------------------------------- Young conjugate

def _golden_max(obj, lo, hi, iters=90):
    """Vectorized golden-section search of a unimodal objective on [lo, hi] (log t)."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - g * (hi - lo)
    d = lo + g * (hi - lo)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        left = fc >= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        nc = np.where(left, hi - g * (hi - lo), d)
        nd = np.where(left, c, lo + g * (hi - lo))
        fnc = np.where(left, obj(nc), fd)
        fnd = np.where(left, fc, obj(nd))
        c, d, fc, fd = nc, nd, fnc, fnd
    return np.where(fc >= fd, c, d)


def _young_row(A, x):
    s = np.geomspace(1e-10, 1e10, TABLE_POINTS)
    lt = np.linspace(np.log(1e-40), np.log(1e40), 801)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = s[:, None] * np.exp(lt)[None, :] - A.func(x, np.exp(lt))[None, :]
        vals = np.where(np.isfinite(vals), vals, -np.inf)
    k = np.argmax(vals, axis=1)
    if np.any(k == lt.size - 1):
        raise ConditionError("conjugate supremum escapes the t-grid: A grows at most linearly")
    lo = lt[np.maximum(k - 1, 0)]
    hi = lt[np.minimum(k + 1, lt.size - 1)]

    def obj(u):
        with np.errstate(over="ignore", invalid="ignore"):
            v = s * np.exp(u) - A.func(x, np.exp(u))
        return np.where(np.isfinite(v), v, -np.inf)

    u = _golden_max(obj, lo, hi)
    conj = np.maximum(obj(u), 0.0)
    keep = conj > 0
    if keep.sum() < 4:
        raise NumericError("conjugate table degenerate")
    return LogLogTable(s[keep], conj[keep])


def young_conjugate(A):
    """Complementary function s -> sup_t (s t - A(x, t)), derived-numeric."""
    return _derived(lambda x: _young_row(A, x), A, f"conj({A.name})")


# ---------------------------------------------------------------- Sobolev conjugate

def _power_slope(f, a, b):
    return np.log(f(np.array(b)) / f(np.array(a))) / np.log(b / a)


def _sobolev_row(A, x, rec):
    n = A.dim
    inv = _inverse_fn(A, x)
    g0 = float(_power_slope(inv, TAU_MIN, 10 * TAU_MIN))
    e0 = g0 - 1.0 / n
    if not e0 > 1e-9:
        raise ConditionError(
            f"integral of A^-1(x,s) s^-(n+1)/n diverges at 0 (local exponent {g0:.6g} <= 1/n)")
    g_inf = float(_power_slope(inv, 1e12, 1e13))
    if g_inf <= 1.0 / n + 1e-6:
        raise UnsupportedCaseError(
            f"A_*^-1 stays bounded at x={x.tolist()} (finite T(x)); only T = +inf is supported")
    c0 = float(inv(np.array(TAU_MIN))) / TAU_MIN ** g0
    tail = c0 * TAU_MIN ** e0 / e0

    def integrand(u):
        return inv(np.exp(u)) * np.exp(-u / n)

    def upto(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = c0 * s ** e0 / e0
        big = s > TAU_MIN
        if big.any():
            out[big] = tail + gk_panels(integrand, np.full(big.sum(), np.log(TAU_MIN)), np.log(s[big]))
        return out

    t_lo, t_hi = COVER
    s_lo = min(TAU_MIN, (t_lo * e0 / c0) ** (1.0 / e0)) if c0 > 0 else TAU_MIN
    s_lo = max(s_lo, 1e-300)
    s_hi = 1e4
    while upto(s_hi)[0] < t_hi and s_hi < 1e296:
        s_hi *= 1e4
    s = np.geomspace(s_lo, s_hi, TABLE_POINTS)
    vals = np.empty_like(s)
    small = s <= TAU_MIN
    vals[small] = c0 * s[small] ** e0 / e0
    big = np.nonzero(~small)[0]
    if big.size:
        edges = np.concatenate([[TAU_MIN], s[big]])
        pieces = gk_panels(integrand, np.log(edges[:-1]), np.log(edges[1:]))
        vals[big] = tail + np.cumsum(pieces)
    rec[tuple(x.tolist())] = np.inf
    return LogLogTable(vals, s)


def sobolev_conjugate(A):
    """A_* via A_*^{-1}(x, s) = int_0^s A^{-1}(x, tau) tau^{-(n+1)/n} dtau, derived-numeric."""
    out = _derived(None, A, f"lower({A.name})")
    rec = out.t_limit
    out._store.builder = lambda x: _sobolev_row(A, x, rec)
    return out


def sobolev_inverse_value(A, x, s):
    """Direct quadrature of A_*^{-1}(x, s) (no table), for cross-checks."""
    n = A.dim
    x = np.asarray(x, dtype=float)
    inv = _inverse_fn(A, x)
    g0 = float(_power_slope(inv, TAU_MIN, 10 * TAU_MIN))
    e0 = g0 - 1.0 / n
    if not e0 > 1e-9:
        raise ConditionError("integral diverges at 0")
    c0 = float(inv(np.array(TAU_MIN))) / TAU_MIN ** g0
    tail = c0 * TAU_MIN ** e0 / e0
    s = float(s)
    if s <= TAU_MIN:
        return c0 * s ** e0 / e0
    body = gk_panels(lambda u: inv(np.exp(u)) * np.exp(-u / n), np.log(TAU_MIN), np.log(s))[0]
    return tail + body


# ---------------------------------------------------------------- upper conjugate

def convexity_defect(f, t):
    """Worst midpoint-convexity defect of f on pairs of grid points, relative to the chord."""
    t = np.asarray(t, dtype=float)
    worst = 0.0
    ft = f(t)
    for step in (1, 2, 4, 8):
        a, b = t[:-step], t[step:]
        fa, fb = ft[:-step], ft[step:]
        mid = f(0.5 * (a + b))
        chord = 0.5 * (fa + fb)
        d = (mid - chord) / np.maximum(np.abs(chord), 1e-300)
        worst = max(worst, float(np.max(d, initial=0.0)))
    return worst


def _upper_row(A, x):
    n = A.dim
    inv = _inverse_fn(A, x)
    if A.deriv is not None:
        def dinv(s):
            return 1.0 / A.deriv(x, inv(s))
    else:
        def dinv(s):
            d = 1e-5
            return (inv(s * (1 + d)) - inv(s * (1 - d))) / (2 * d * s)

    def phi(s):
        s = np.asarray(s, dtype=float)
        return s ** ((n + 1.0) / n) * dinv(s)

    t_lo, t_hi = COVER
    s_lo, s_hi = 1e-3, 1e3
    while phi(s_lo) > t_lo and s_lo > 1e-297:
        s_lo *= 1e-3
    while phi(s_hi) < t_hi and s_hi < 1e297:
        s_hi *= 1e3
    s = np.geomspace(s_lo, s_hi, TABLE_POINTS)
    t = phi(s)
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise NumericError("upper-conjugate inverse table is not strictly increasing")
    return LogLogTable(t, s)


def check_p0_star(A, x, t_grid=None, tol=1e-9):
    """Worst midpoint-convexity defect of t -> A(x, t)^(-1/n) on (0, inf)."""
    t_grid = np.geomspace(1e-4, 1e4, 161) if t_grid is None else t_grid
    n = A.dim
    return convexity_defect(lambda t: A.func(x, t) ** (-1.0 / n), t_grid)


def upper_conjugate(A, t_grid=None, tol=1e-9):
    """A* via (A*)^{-1}(x, s) = s^{(n+1)/n} d/ds A^{-1}(x, s), derived-numeric."""

    def build(x):
        defect = check_p0_star(A, x, t_grid)
        if defect > tol:
            raise ConditionError(f"A^(-1/n) is not convex at x={x.tolist()} (defect {defect:.3g})")
        return _upper_row(A, x)

    return _derived(build, A, f"upper({A.name})")


# ---------------------------------------------------------------- condition checks

@dataclass
class SamplingPlan:
    x_points: np.ndarray
    t_grid: np.ndarray = field(default_factory=lambda: np.geomspace(1e-3, 1e3, 61))
    tol: float = 1e-9

    @classmethod
    def lattice(cls, domain, per_side, t_grid=None, tol=1e-9):
        n = domain.dim
        h = domain.side / per_side
        axes = [domain.lo[k] + (np.arange(per_side) + 0.5) * h for k in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        kw = {} if t_grid is None else {"t_grid": np.asarray(t_grid, dtype=float)}
        return cls(pts, tol=tol, **kw)


@dataclass
class Verdict:
    name: str
    holds: bool
    witness: dict
    note: str = ""


@dataclass
class ConditionReport:
    entries: dict = field(default_factory=dict)

    def add(self, v):
        self.entries[v.name] = v

    def __getitem__(self, key):
        return self.entries[key]

    @property
    def all_hold(self):
        return all(v.holds for v in self.entries.values())

    def rows(self):
        return [(v.name, v.holds, v.witness, v.note) for v in self.entries.values()]


def check_conditions(A, plan, astar=None, conditions=("C1", "delta2", "P3", "P0*", "P5*")):
    """Sampled verdicts for (C1), strong Delta_2, (P3), (P0*) and (P5*)."""
    rep = ConditionReport()
    X = np.asarray(plan.x_points, dtype=float)
    T = np.asarray(plan.t_grid, dtype=float)

    if "C1" in conditions:
        c1 = float(np.min(A.func(X, np.ones(X.shape[0]))))
        rep.add(Verdict("C1", c1 > 0, {"c1": c1}))

    if "delta2" in conditions:
        tt = np.geomspace(T.min(), 1e3, 121)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ratio = A.func(X[:, None, :], 2 * tt[None, :]) / A.func(X[:, None, :], tt[None, :])
        ratio = np.where(np.isnan(ratio), np.inf, ratio)
        per_t = np.max(ratio, axis=0)
        K = float(np.max(per_t))
        top = tt >= tt[-1] / 10
        bounded = np.isfinite(K) and float(np.max(per_t[top])) <= (1 + 1e-6) * float(np.max(per_t[~top])) + 1e-12
        rep.add(Verdict("delta2", bool(bounded), {"K": K, "sup_h": 0.0}, "strong form, h = 0"))

    if "P3" in conditions:
        vals, ok = [], True
        for x in X[:: max(1, X.shape[0] // 16)]:
            try:
                vals.append(sobolev_inverse_value(A, x, 1.0))
            except ConditionError:
                ok = False
                vals.append(np.inf)
        rep.add(Verdict("P3", ok, {"integral_0_1": float(np.max(vals))}))

    if "P0*" in conditions:
        worst = max(check_p0_star(A, x, T) for x in X[:: max(1, X.shape[0] // 16)])
        rep.add(Verdict("P0*", worst <= plan.tol, {"defect": worst}))

    if "P5*" in conditions:
        rep.add(_p5_star(A, X, astar, plan))
    return rep


def _p5_star(A, X, astar, plan, t0=1.0):
    n = A.dim
    if astar is None:
        try:
            astar = upper_conjugate(A)
        except ConditionError as exc:
            return Verdict("P5*", False, {}, str(exc))
    if not A.x_dependent:
        return Verdict("P5*", True, {"C0": 0.0, "delta0": 0.0, "t0": t0}, "A independent of x")
    dom = A.domain
    hx = 1e-5 * dom.side
    inner = X[np.all((X - dom.lo > 2 * hx) & (dom.hi - X > 2 * hx), axis=1)]
    inner = inner[:: max(1, inner.shape[0] // 12)]
    tt = np.geomspace(t0, 1e3, 25)
    logs_a, logs_g = [], []
    for x in inner:
        val = astar(x, tt)
        grad = np.zeros((n, tt.size))
        for k in range(n):
            e = np.zeros(n)
            e[k] = hx
            grad[k] = (astar(x + e, tt) - astar(x - e, tt)) / (2 * hx)
        gnorm = np.sqrt(np.sum(grad ** 2, axis=0))
        keep = gnorm > 0
        logs_a.append(np.log(val[keep]))
        logs_g.append(np.log(gnorm[keep]))
    if not logs_a or sum(a.size for a in logs_a) < 2:
        return Verdict("P5*", True, {"C0": 0.0, "delta0": 0.0, "t0": t0}, "gradient vanishes on samples")
    la, lg = np.concatenate(logs_a), np.concatenate(logs_g)
    slope, icpt = np.polyfit(la, lg, 1)
    delta0 = max(float(slope) - 1.0, 0.0)
    C0 = float(np.max(np.exp(lg - (1 + delta0) * la)))
    holds = slope < 1 + 1.0 / n - 1e-3
    return Verdict("P5*", bool(holds), {"C0": C0, "delta0": delta0, "t0": t0, "slope": float(slope)})


# ---------------------------------------------------------------- families

def power(p, dim=1, domain=None, scale=1.0):
    """A(t) = scale * t^p."""
    domain = Cube.unit(dim) if domain is None else domain
    if not p > 1:
        raise ConditionError("power N-function needs p > 1")
    c = float(scale)
    return NFun(func=lambda x, t: c * np.asarray(t, dtype=float) ** p,
                deriv=lambda x, t: c * p * np.asarray(t, dtype=float) ** (p - 1),
                inverse=lambda x, s: (np.asarray(s, dtype=float) / c) ** (1.0 / p),
                dim=dim, domain=domain, name=f"t^{p:g}", x_dependent=False,
                declared=frozenset({"C1", "delta2"}))


def power_px(pfun, dim, domain=None, name="t^p(x)"):
    """A(x, t) = t^{p(x)} for a vectorized exponent field ``pfun(x)``."""
    domain = Cube.unit(dim) if domain is None else domain

    def f(x, t):
        return np.asarray(t, dtype=float) ** pfun(x)

    def df(x, t):
        p = pfun(x)
        return p * np.asarray(t, dtype=float) ** (p - 1)

    def inv(x, s):
        return np.asarray(s, dtype=float) ** (1.0 / pfun(x))

    return NFun(func=f, deriv=df, inverse=inv, dim=dim, domain=domain, name=name,
                declared=frozenset({"C1", "delta2"}))


def exp_type(dim=1, domain=None):
    """A(t) = e^t - t - 1: an N-function without the Delta_2 property."""
    domain = Cube.unit(dim) if domain is None else domain
    def f(x, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            big = np.expm1(t) - t
        small = t * t * (0.5 + t * (1.0 / 6 + t * (1.0 / 24 + t / 120)))
        return np.where(t < 1e-3, small, big)

    return NFun(func=f,
                deriv=lambda x, t: np.expm1(np.minimum(np.asarray(t, dtype=float), 709.0)),
                dim=dim, domain=domain, name="exp", x_dependent=False,
                declared=frozenset({"C1"}))


def broken_power(p_low, p_high, dim=1, domain=None):
    """t^p_low on [0, 1] and t^p_high beyond; convex when p_low <= p_high."""
    domain = Cube.unit(dim) if domain is None else domain

    def f(x, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 1, t ** p_low, t ** p_high)

    def df(x, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1, p_low * t ** (p_low - 1), p_high * t ** (p_high - 1))

    def inv(x, s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= 1, s ** (1.0 / p_low), s ** (1.0 / p_high))

    return NFun(func=f, deriv=df, inverse=inv, dim=dim, domain=domain,
                name=f"t^{p_low:g}|t^{p_high:g}", x_dependent=False)


def dump_rows(A, x_points, t_grid):
    """Rows (x_index, t, A) for CSV export."""
    rows = []
    for i, x in enumerate(np.asarray(x_points, dtype=float)):
        vals = A(x, t_grid)
        rows.extend((i, float(t), float(v)) for t, v in zip(t_grid, vals))
    return rows
