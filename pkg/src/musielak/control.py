"""One-variable control functions and the hat / star / tilde transforms.

A lower control c of A satisfies A(x, a t) >= c(a) A(x, t); its hat
b -> 1/c(1/b) is then the matching upper control. Piecewise powers are
stored as ``(below, above)`` exponent pairs: a^below for a < 1, a^above
for a >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._numeric import invert_increasing_log
from .cube import Cube
from .errors import ConditionError
from .nfunction import ConditionReport, Verdict, convexity_defect

ALPHA_GRID = np.geomspace(1e-4, 1e4, 129)
M0_EXPONENTS = tuple(range(-8, 9))
FIT_MARGIN = 1.0 - 1e-6


@dataclass(frozen=True, eq=False)
class CtrlFun:
    func: Callable | None
    inv: Callable | None = None
    kind: str = "closed-form"
    region: Cube | None = None
    name: str = "c"
    exponents: tuple | None = None
    hat_of: "CtrlFun | None" = field(default=None, repr=False)

    def __post_init__(self):
        if self.func is None and self.inv is None:
            raise ValueError("a control function needs a value map or an inverse map")

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        out = np.zeros(a.shape)
        pos = a > 0
        if self.func is not None:
            out[pos] = self.func(a[pos])
        else:
            out[pos] = invert_increasing_log(self.inv, a[pos])
        return out[()]

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape)
        pos = y > 0
        if self.inv is not None:
            out[pos] = self.inv(y[pos])
        else:
            out[pos] = invert_increasing_log(self.func, y[pos])
        return out[()]

    def dump_rows(self, grid=ALPHA_GRID):
        return list(zip(map(float, grid), map(float, self(grid))))


def power_ctrl(p, name=None):
    return piecewise_power(p, p, name=name or f"a^{p:g}")


def piecewise_power(below, above, name=None, region=None):
    """a^below for a < 1 and a^above for a >= 1."""
    b, a = float(below), float(above)

    def f(x):
        return np.where(x < 1, x ** b, x ** a)

    def g(y):
        return np.where(y < 1, y ** (1.0 / b), y ** (1.0 / a))

    return CtrlFun(f, g, name=name or f"pw({b:g},{a:g})", exponents=(b, a), region=region)


def from_callable(f, name="c", inverse=None):
    return CtrlFun(f, inverse, name=name)


class _LogLinear:
    """Piecewise-linear interpolation in log-log coordinates with end-slope extension."""

    def __init__(self, x, y):
        self.lx, self.ly = np.log(x), np.log(y)
        self.s0 = (self.ly[1] - self.ly[0]) / (self.lx[1] - self.lx[0])
        self.s1 = (self.ly[-1] - self.ly[-2]) / (self.lx[-1] - self.lx[-2])

    def __call__(self, x):
        lx = np.log(x)
        ly = np.interp(lx, self.lx, self.ly)
        ly = np.where(lx < self.lx[0], self.ly[0] + self.s0 * (lx - self.lx[0]), ly)
        ly = np.where(lx > self.lx[-1], self.ly[-1] + self.s1 * (lx - self.lx[-1]), ly)
        return np.exp(ly)


def table_ctrl(alpha, values, name="fitted", region=None):
    alpha = np.asarray(alpha, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0) or np.any(np.diff(values) <= 0):
        raise ConditionError("fitted control is not strictly increasing and positive")
    fwd = _LogLinear(alpha, values)
    bwd = _LogLinear(values, alpha)
    return CtrlFun(fwd, bwd, kind="fitted-table", name=name, region=region)


# ---------------------------------------------------------------- transforms

def hat(c):
    """b -> 1/c(1/b), 0 -> 0. Exact involution: hat(hat(c)) is c itself."""
    if c.hat_of is not None:
        return c.hat_of
    if c.exponents is not None:
        b, a = c.exponents
        out = piecewise_power(a, b, name=f"hat({c.name})", region=c.region)
    else:
        out = CtrlFun(lambda y: 1.0 / c(1.0 / y), lambda s: 1.0 / c.inverse(1.0 / s),
                      kind=c.kind, region=c.region, name=f"hat({c.name})")
    object.__setattr__(out, "hat_of", c)
    return out


def compose(c, d):
    """(c o d)(a) = c(d(a))."""
    return CtrlFun(lambda a: c(d(a)), lambda y: d.inverse(c.inverse(y)),
                   name=f"{c.name}o{d.name}")


def inverse_ctrl(c):
    return CtrlFun(c.inverse, c.__call__, name=f"inv({c.name})")


def _log_derivative(c, grid, rel=1e-5):
    """a c'(a) / c(a) by central differences."""
    up, dn = c(grid * (1 + rel)), c(grid * (1 - rel))
    return grid * (up - dn) / (2 * rel * grid) / c(grid)


def star(c, n, grid=ALPHA_GRID):
    """Control with star(c)^-1(s) = 1 / (s^(1/n) c^-1(1/s)); needs n c > a c'."""
    ld = _log_derivative(c, grid)
    bad = np.nonzero(~(n > ld))[0]
    if bad.size:
        raise ConditionError(f"n c(a) > a c'(a) fails at a = {grid[bad[0]]:.6g}")

    def inv(s):
        return 1.0 / (s ** (1.0 / n) * c.inverse(1.0 / s))

    return CtrlFun(None, inv, kind=c.kind, region=c.region, name=f"star({c.name})")


def tilde(c, grid=ALPHA_GRID):
    """Control with tilde(c)^-1(s) = s / c^-1(s); needs a c' > c."""
    ld = _log_derivative(c, grid)
    bad = np.nonzero(~(ld > 1))[0]
    if bad.size:
        raise ConditionError(f"a c'(a) > c(a) fails at a = {grid[bad[0]]:.6g}")

    def inv(s):
        return s / c.inverse(s)

    return CtrlFun(None, inv, kind=c.kind, region=c.region, name=f"tilde({c.name})")


# ---------------------------------------------------------------- fitting

def fit_control(A, region, plan, grid=ALPHA_GRID, margin=FIT_MARGIN, chunk=256):
    """Lower control of A over the sample points of ``plan`` inside ``region``."""
    X = np.asarray(plan.x_points, dtype=float)
    X = X[region.contains(X)]
    if X.shape[0] == 0:
        raise ConditionError(f"no sample points inside region {region.label()}")
    T = np.asarray(plan.t_grid, dtype=float)
    best = np.full(grid.shape, np.inf)
    for i in range(0, X.shape[0], chunk):
        xs = X[i:i + chunk]
        base = A(xs[:, None, :], T[None, :])
        if np.any(base <= 0):
            raise ConditionError("A vanishes at a sampled positive t")
        for j, a in enumerate(grid):
            r = A(xs[:, None, :], a * T[None, :]) / base
            best[j] = min(best[j], float(np.min(r)))
    return table_ctrl(grid, best * margin, name=f"fit[{region.label()}]", region=region)


# ---------------------------------------------------------------- growth conditions

@dataclass
class ConstantsReport:
    condition: str
    M0: float
    M1: float
    M2: float
    worst_pair: tuple
    verdict: bool
    per_M0: list = field(default_factory=list)


def growth_constants(c, mode, M0, grid=ALPHA_GRID):
    """(M1, M2, argmax pair) for a fixed M0 on the grid."""
    cv = c(grid)
    hv = hat(c)(grid)
    prod = c(M0 * np.multiply.outer(grid, grid))
    low_base, up_base = (np.multiply.outer(cv, cv), np.multiply.outer(hv, hv))
    if mode == "nabla":
        low_base, up_base = up_base, low_base
    lo = prod / low_base
    up = prod / up_base
    k = np.unravel_index(np.argmax(up), up.shape)
    return float(np.min(lo)), float(np.max(up)), (float(grid[k[0]]), float(grid[k[1]])), lo, up


def check_growth_condition(c, mode="delta", grid=ALPHA_GRID, stability=2.0):
    """Grid search of M0 in 2^k for the Delta/nabla multiplicativity constants.

    A constant pair counts as bounded when the full-grid values stay within
    ``stability`` of those on the inner window [1e-2, 1e2]; this is the
    finite-grid proxy for boundedness.
    """
    if mode not in ("delta", "nabla"):
        raise ValueError("mode must be 'delta' or 'nabla'")
    inner = (grid >= 1e-2 * (1 - 1e-12)) & (grid <= 1e2 * (1 + 1e-12))
    best = None
    rows = []
    for k in sorted(M0_EXPONENTS, key=lambda k: (abs(k), k)):
        M0 = 2.0 ** k
        M1, M2, pair, lo, up = growth_constants(c, mode, M0, grid)
        M1i = float(np.min(lo[np.ix_(inner, inner)]))
        M2i = float(np.max(up[np.ix_(inner, inner)]))
        ok = (np.isfinite(M1) and np.isfinite(M2) and M1 > 0 and M2 > 0
              and M1 >= M1i / stability and M2 <= M2i * stability)
        rows.append((M0, M1, M2, bool(ok)))
        # ties go to the M0 closest to 1
        if ok and (best is None or M2 / M1 < best[2] / best[1] * (1 - 1e-12)):
            best = (M0, M1, M2, pair)
    rows.sort(key=lambda r: r[0])
    cond = "Delta_R+" if mode == "delta" else "nabla_R+"
    if best is None:
        M0, M1, M2, _ = rows[len(rows) // 2]
        return ConstantsReport(cond, M0, M1, M2, (np.nan, np.nan), False, rows)
    return ConstantsReport(cond, best[0], best[1], best[2], best[3], True, rows)


# ---------------------------------------------------------------- log-Hoelder

@dataclass
class LogHolderReport:
    rows: list
    sup_rho: float
    sup_rho_levels: float
    L_max: float
    verdict: bool
    equivalent: bool

    def csv_rows(self):
        return [(r["R"], r["rho"], r["verdict"]) for r in self.rows]


def check_log_holder(ctrl_family, cubes, L_max, omega_volume=None):
    """rho(R) = hat(c_R)(1/|Q_R|) / c_R(1/|Q_R|) per cube, and the t-form on [|Q_R|, |Omega|]."""
    rows = []
    for Q in cubes:
        c = ctrl_family(Q)
        ch = hat(c)
        y = 1.0 / Q.volume
        rho = float(ch(y) / c(y))
        top = Q.volume if omega_volume is None else max(omega_volume, Q.volume)
        ts = np.geomspace(Q.volume, top, 17)
        rho2 = float(np.max(ch(1.0 / ts) / c(1.0 / ts)))
        rows.append({"cube": Q.label(), "depth": Q.depth, "R": Q.half_width, "rho": rho,
                     "rho_levels": rho2, "verdict": bool(rho <= L_max)})
    sup1 = max(r["rho"] for r in rows)
    sup2 = max(r["rho_levels"] for r in rows)
    v1, v2 = sup1 <= L_max, sup2 <= L_max
    return LogHolderReport(rows, sup1, sup2, L_max, bool(v1), bool(v1 == v2))


# ---------------------------------------------------------------- composite hypotheses

def composite_condition_check(A, cubes, T0, plan, astar=None, family=None, global_pair=None,
                              R0=None, convex_rtol=1e-2, tol=1e-9, tgrid=None):
    """Convexity hypotheses on c_R = A_R o (A*_R)^-1 and A* o A^-1 o c_R.

    ``family(Q)`` may supply (lower control of A, lower control of A*) per
    cube; otherwise both are fitted from the samples. Check (i) is a
    midpoint-convexity scan with relative tolerance ``convex_rtol`` plus
    superlinear/sublinear proxies; check (ii) uses ``tol`` on t >= T0.
    """
    from .nfunction import upper_conjugate

    if family is None or global_pair is None:
        if astar is None:
            astar = upper_conjugate(A)
        fam = family or (lambda Q: (fit_control(A, Q, plan), fit_control(astar, Q, plan)))
        gp = global_pair or fam(A.domain)
    else:
        fam, gp = family, global_pair
    glob, glob_star = gp
    R0 = A.domain.half_width / 4 if R0 is None else R0
    t = np.geomspace(1e-4, 1e4, 129) if tgrid is None else tgrid
    outer = compose(glob_star, inverse_ctrl(glob))

    worst_i, worst_ii, ok_i = 0.0, 0.0, True
    starts = []
    for Q in cubes:
        c, cs = fam(Q)
        cR = compose(c, inverse_ctrl(cs))
        d_i = convexity_defect(cR, t)
        slope_hi = cR(t[-1]) / t[-1]
        slope_lo = cR(t[0]) / t[0]
        super_sub = slope_hi >= 10 * slope_lo
        ok_i &= (d_i <= convex_rtol) and super_sub
        worst_i = max(worst_i, d_i)
        if Q.half_width <= R0 * (1 + 1e-12):
            g = compose(outer, cR)
            d_ii = convexity_defect(g, t[t >= T0]) if np.sum(t >= T0) > 2 else 0.0
            worst_ii = max(worst_ii, d_ii)
            k = len(t) - 3
            while k > 0 and convexity_defect(g, t[k - 1:]) <= tol:
                k -= 1
            starts.append(t[k])
    T0_min = float(max(starts)) if starts else float(t[0])
    rep = ConditionReport()
    rep.add(Verdict("composite_N", bool(ok_i), {"worst_defect": worst_i, "rtol": convex_rtol}))
    rep.add(Verdict("composite_convex_T0", bool(worst_ii <= tol),
                    {"worst_defect": worst_ii, "T0": float(T0), "T0_min": T0_min}))
    return rep
