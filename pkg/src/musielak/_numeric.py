"""Small numerical kernels: monotone inversion, Gauss-Kronrod panels, log-log tables."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NumericError

# 15-point Kronrod rule with its embedded 7-point Gauss rule (QUADPACK qk15 constants).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_gauss_full = np.zeros(8)
_gauss_full[1::2] = _WG
GAUSS_WEIGHTS = np.concatenate([_gauss_full[:-1], _gauss_full[::-1]])


def gk_panels(f, a, b, rtol=1e-13, atol=1e-300, max_depth=40):
    """Integrate a vectorized ``f`` over every panel ``[a_i, b_i]``.

    Panels whose Kronrod/Gauss discrepancy exceeds the tolerance are halved
    until they converge. Returns one integral per input panel.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    owner = np.arange(a.size)
    total = np.zeros(a.size)
    for _ in range(max_depth):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * KRONROD_NODES[None, :]
        vals = f(nodes)
        kron = half * (vals @ KRONROD_WEIGHTS)
        gauss = half * (vals @ GAUSS_WEIGHTS)
        if not np.all(np.isfinite(kron)):
            raise NumericError("non-finite integrand on a quadrature panel")
        ok = np.abs(kron - gauss) <= np.maximum(atol, rtol * np.abs(kron))
        np.add.at(total, owner[ok], kron[ok])
        if ok.all():
            return total
        a, b, owner = a[~ok], b[~ok], owner[~ok]
        mid = mid[~ok]
        a, b, owner = np.concatenate([a, mid]), np.concatenate([mid, b]), np.concatenate([owner, owner])
    # depth exhausted: accept the last estimate for the stubborn panels
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = f(mid[:, None] + half[:, None] * KRONROD_NODES[None, :])
    np.add.at(total, owner, half * (vals @ KRONROD_WEIGHTS))
    return total


def invert_increasing(f, y, rtol=1e-10, eps_abs=1e-300, max_iter=2000):
    """Solve ``f(t) = y`` for nondecreasing ``f`` with ``f(0) = 0``, elementwise.

    Bracket grows by doubling from [0, 1], then plain bisection. ``f`` is
    always called on arrays shaped like ``y``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise NumericError("inversion target must be finite and nonnegative")
    pos = y > 0
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(2100):
        need = pos & (f(hi) < y)
        if not need.any():
            break
        with np.errstate(over="ignore"):  # overflow to inf is the bounded-f signal
            hi = np.where(need, 2.0 * hi, hi)
        lo = np.where(need, 0.5 * hi, lo)
        if np.any(~np.isfinite(hi)):
            break
    else:
        raise NumericError("could not bracket the inverse: function looks bounded")
    if np.any(~np.isfinite(hi)):
        raise NumericError("could not bracket the inverse: function looks bounded")

    tol = rtol * np.maximum(y, eps_abs)
    t = np.where(pos, 0.5 * (lo + hi), 0.0)
    active = pos.copy()
    for _ in range(max_iter):
        if not active.any():
            break
        t = np.where(active, 0.5 * (lo + hi), t)
        ft = f(t)
        done = active & ((np.abs(ft - y) <= tol) | (hi - lo <= 4e-16 * hi))
        below = ft < y
        lo = np.where(active & ~done & below, t, lo)
        hi = np.where(active & ~done & ~below, t, hi)
        active &= ~done
    return t


def invert_increasing_log(f, y, lo=1e-3, hi=1e3, rtol=1e-15, max_iter=200):
    """Solve ``f(t) = y`` for strictly increasing positive ``f`` on (0, inf), bisecting in log t."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    if not pos.any():
        return out
    yy = y[pos]
    llo = np.full(yy.shape, np.log(lo))
    lhi = np.full(yy.shape, np.log(hi))
    for _ in range(200):
        bad = f(np.exp(llo)) > yy
        if not bad.any():
            break
        llo = np.where(bad, llo - 10.0, llo)
    for _ in range(200):
        bad = f(np.exp(lhi)) < yy
        if not bad.any():
            break
        lhi = np.where(bad, lhi + 10.0, lhi)
    for _ in range(max_iter):
        mid = 0.5 * (llo + lhi)
        below = f(np.exp(mid)) < yy
        llo = np.where(below, mid, llo)
        lhi = np.where(below, lhi, mid)
        if np.all(lhi - llo <= rtol):
            break
    out[pos] = np.exp(0.5 * (llo + lhi))
    return out


class LogLogTable:
    """Monotone table y(x) interpolated by PCHIP in (log x, log y).

    Outside the tabulated range the end slopes are extended, i.e. power-law
    extrapolation; x = 0 maps to 0. Pure power laws are reproduced exactly.
    """

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise NumericError("table must be two matching 1-d arrays")
        if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
            raise NumericError("table entries must be positive and finite")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise NumericError("table is not strictly increasing")
        self.x, self.y = x, y
        self.lx, self.ly = np.log(x), np.log(y)
        self._interp = PchipInterpolator(self.lx, self.ly, extrapolate=False)
        self.slope_lo = (self.ly[1] - self.ly[0]) / (self.lx[1] - self.lx[0])
        self.slope_hi = (self.ly[-1] - self.ly[-2]) / (self.lx[-1] - self.lx[-2])
        self._swapped = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0
        lx = np.log(x[pos])
        ly = self._interp(lx)
        below = lx < self.lx[0]
        above = lx > self.lx[-1]
        ly = np.where(below, self.ly[0] + self.slope_lo * (lx - self.lx[0]), ly)
        ly = np.where(above, self.ly[-1] + self.slope_hi * (lx - self.lx[-1]), ly)
        out[pos] = np.exp(ly)
        return out

    def inverse(self, y):
        if self._swapped is None:
            self._swapped = LogLogTable(self.y, self.x)
        return self._swapped(y)


def log_grid(lo, hi, num):
    return np.geomspace(lo, hi, num)
