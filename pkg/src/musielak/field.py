"""Scalar fields sampled at cell centers of a uniform lattice over a cube."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cube import Cube
from .errors import AlignmentError

_ALIGN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridField:
    """Values at the m^n cell centers of ``domain``; ``values`` has shape (m,)*n."""

    domain: Cube
    m: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.domain.dim
        if v.size == self.m ** n and v.shape != (self.m,) * n:
            v = v.reshape((self.m,) * n)
        if v.shape != (self.m,) * n:
            raise ValueError(f"expected values of shape {(self.m,) * n}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, domain, m, f):
        return cls(domain, m, f(cell_centers(domain, m)))

    @property
    def n(self):
        return self.domain.dim

    @property
    def h(self):
        return self.domain.side / self.m

    def centers(self):
        return cell_centers(self.domain, self.m)

    def with_values(self, values):
        return GridField(self.domain, self.m, values)

    def block(self, Q):
        return self.values[cube_slices(self, Q)]

    def coarsen(self):
        """Average 2^n blocks onto the next coarser lattice."""
        n, k = self.n, self.m // 2
        v = self.values.reshape(sum(((k, 2) for _ in range(n)), ()))
        return GridField(self.domain, k, v.mean(axis=tuple(range(1, 2 * n, 2))))


@dataclass(frozen=True, eq=False)
class VectorField:
    domain: Cube
    m: int
    components: np.ndarray  # shape (n,) + (m,)*n

    def magnitude(self, mode="euclid"):
        if mode == "euclid":
            mag = np.sqrt(np.sum(self.components ** 2, axis=0))
        elif mode == "sum":
            mag = np.sum(np.abs(self.components), axis=0)
        else:
            raise ValueError(f"unknown magnitude mode {mode!r}")
        return GridField(self.domain, self.m, mag)


def cell_centers(domain, m):
    """Array of shape (m,)*n + (n,) with the cell-center coordinates."""
    n = domain.dim
    h = domain.side / m
    axes = [domain.lo[k] + (np.arange(m) + 0.5) * h for k in range(n)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def cube_slices(f, Q):
    """Index slices of the cells of ``f`` lying in ``Q``; raises on misalignment."""
    h = f.h
    start = (Q.lo - f.domain.lo) / h
    count = Q.side / h
    i0 = np.rint(start)
    c = np.rint(count)
    if (np.any(np.abs(start - i0) > _ALIGN_TOL) or abs(count - c) > _ALIGN_TOL or c < 1
            or np.any(i0 < 0) or np.any(i0 + c > f.m)):
        raise AlignmentError(f"cube {Q.label()} is not aligned with the {f.m}-cell lattice")
    return tuple(slice(int(a), int(a + c)) for a in i0)


def cube_average(f, Q=None):
    Q = f.domain if Q is None else Q
    return float(np.mean(f.block(Q)))


def _cell_points(f, Q):
    return f.centers()[cube_slices(f, Q)]


def modular(f, A, Q=None):
    """h^n * sum over cells of Q of A(x_cell, |f_cell|)."""
    Q = f.domain if Q is None else Q
    vals = np.abs(f.block(Q))
    return float(f.h ** f.n * np.sum(A(_cell_points(f, Q), vals)))


def luxemburg_norm(f, A, Q=None, tol=1e-8, max_iter=200):
    """inf{lam > 0 : modular(f/lam) <= 1} by bisection in log(lam)."""
    Q = f.domain if Q is None else Q
    vals = np.abs(f.block(Q))
    if not np.any(vals > 0):
        return 0.0
    if A.kind == "closed-form" and "delta2" not in A.declared:
        warnings.warn("Luxemburg norm of an N-function without a declared Delta_2 bound", stacklevel=2)
    pts = _cell_points(f, Q)
    w = f.h ** f.n

    def mod(lam):
        return w * float(np.sum(A(pts, vals / lam)))

    lo, hi = 1e-8, 1.0
    while mod(hi) >= 1:
        hi *= 2.0
    while mod(lo) < 1:
        lo *= 0.5
    for _ in range(max_iter):
        mid = np.sqrt(lo * hi)
        val = mod(mid)
        if abs(val - 1.0) <= tol:
            return float(mid)
        if val > 1:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def gradient_field(u):
    """Forward differences per axis; the last layer repeats the last difference."""
    comps = []
    for k in range(u.n):
        d = np.diff(u.values, axis=k) / u.h
        last = np.take(d, [-1], axis=k)
        comps.append(np.concatenate([d, last], axis=k))
    return VectorField(u.domain, u.m, np.stack(comps))


def poincare_ratio(u, A, Q):
    """||u - u_Q||_A / (R ||grad u||_A) with Luxemburg norms on Q."""
    mean = cube_average(u, Q)
    osc = u.with_values(u.values - mean)
    num = luxemburg_norm(osc, A, Q)
    if num == 0.0:
        return 0.0
    grad = gradient_field(u).magnitude("euclid")
    den = luxemburg_norm(grad, A, Q)
    return num / (Q.half_width * den)


def sobolev_poincare_check(u, A, astar, ctrl_pair, Q):
    """hat(c)^-1(avg A(|u-u_Q|/R)) / hat(c*)^-1(avg A*(|grad u|)) on Q."""
    from .control import hat

    ctrl, ctrl_star = ctrl_pair
    R = Q.half_width
    pts = _cell_points(u, Q)
    osc = np.abs(u.block(Q) - cube_average(u, Q)) / R
    num_arg = float(np.mean(A(pts, osc)))
    if num_arg == 0.0:
        return 0.0
    grad = gradient_field(u).magnitude("euclid").block(Q)
    den_arg = float(np.mean(astar(pts, grad)))
    return float(hat(ctrl).inverse(num_arg) / hat(ctrl_star).inverse(den_arg))


# ---------------------------------------------------------------- MOGRID v1

def format_mogrid(f):
    center = ",".join(repr(float(c)) for c in f.domain.center)
    lines = [f"MOGRID v1 n={f.n} m={f.m} center={center} half={float(f.domain.half_width)!r}"]
    lines.extend(f"{v:.17g}" for v in f.values.ravel())
    return "\n".join(lines) + "\n"


def parse_mogrid(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[:2] != ["MOGRID", "v1"]:
        raise ValueError("not a MOGRID v1 file")
    meta = dict(item.split("=", 1) for item in head[2:])
    n, m = int(meta["n"]), int(meta["m"])
    center = tuple(float(c) for c in meta["center"].split(","))
    if len(center) != n:
        raise ValueError("center does not have n coordinates")
    vals = np.array([float(v) for v in lines[1:]])
    if vals.size != m ** n:
        raise ValueError(f"expected {m ** n} values, found {vals.size}")
    return GridField(Cube(center, float(meta["half"])), m, vals.reshape((m,) * n))


def write_mogrid(path, f):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mogrid(f))


def read_mogrid(path):
    with open(path, encoding="utf-8") as fh:
        return parse_mogrid(fh.read())
