"""Discrete Musielak-growth energies, a convex solver and interior estimate scans.

Nodal values live at the m^n cell centers. The energy is assembled on the
(m-1)^n dual cells between neighbouring centers, each with weight
|Omega| / (m-1)^n and forward differences along every axis, so affine fields
have exactly constant discrete gradients and integrate to their exact energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .control import compose, hat, inverse_ctrl
from .cube import Cube, interior_dyadic_cubes
from .czg import m_function, reverse_constant
from .errors import ConditionError, NumericError
from .field import GridField, cell_centers, cube_average, gradient_field, write_mogrid
from .nfunction import NFun, musielak_derivative

MODES = ("default", "oscillating")


@dataclass(frozen=True, eq=False)
class Problem:
    """Minimize sum-form integrand f(x, z) = A(x, sum |z_i|) (+ b1 sin^2(x_1 |z|_1)).

    ``boundary`` is a callable on points (shape (..., n)), a GridField on
    the same lattice, or an array of shape (m,)*n; only its values on the
    outer ``layer`` cells are used.
    """

    A: NFun
    m: int
    boundary: Callable | GridField | np.ndarray
    domain: Cube | None = None
    b1: float = 0.0
    b2: float = 1.0
    b3: float = 1.0
    mode: str = "default"
    layer: int = 1

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", self.A.domain)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 <= self.b2 <= 1 <= self.b3:
            raise ValueError("need 0 <= b2 <= 1 <= b3 for the built-in integrands")
        if self.b1 < 0:
            raise ValueError("b1 must be nonnegative")
        if self.mode == "default" and self.b1 != 0:
            raise ValueError("the default integrand has b1 = 0; use mode='oscillating'")
        if self.m < 2 * self.layer + 1:
            raise ValueError("lattice too small for the boundary layer")

    @property
    def n(self):
        return self.domain.dim

    def integrand(self, x, s):
        val = self.A(x, s)
        if self.mode == "oscillating":
            val = val + self.b1 * np.sin(x[..., 0] * s) ** 2
        return val

    def integrand_slope(self, x, s):
        d = musielak_derivative(self.A, x, s)
        if self.mode == "oscillating":
            d = d + self.b1 * x[..., 0] * np.sin(2 * x[..., 0] * s)
        return d

    @cached_property
    def grid(self):
        return _Discretization(self)


class _Discretization:
    def __init__(self, P):
        n, m = P.n, P.m
        self.n, self.m = n, m
        self.h = P.domain.side / m
        self.weight = P.domain.volume / (m - 1) ** n
        nodes = np.arange(m ** n).reshape((m,) * n)
        cut = tuple(slice(0, m - 1) for _ in range(n))
        base = nodes[cut].ravel()
        nd = base.size
        rows = np.arange(nd)
        self.D = []
        for k in range(n):
            sl = list(cut)
            sl[k] = slice(1, m)
            nxt = nodes[tuple(sl)].ravel()
            data = np.concatenate([-np.ones(nd), np.ones(nd)]) / self.h
            self.D.append(sp.csr_matrix((data, (np.concatenate([rows, rows]),
                                                np.concatenate([base, nxt]))), shape=(nd, m ** n)))
        centers = cell_centers(P.domain, m)
        self.x_dual = (centers[cut] + 0.5 * self.h).reshape(-1, n)
        idx = np.indices((m,) * n)
        L = P.layer
        edge = np.zeros((m,) * n, dtype=bool)
        for k in range(n):
            edge |= (idx[k] < L) | (idx[k] >= m - L)
        self.fixed = edge.ravel()
        self.free = ~self.fixed
        bd = P.boundary
        if callable(bd) and not isinstance(bd, GridField):
            vals = np.asarray(bd(centers), dtype=float)
        else:
            vals = np.asarray(bd.values if isinstance(bd, GridField) else bd, dtype=float)
        if vals.shape != (m,) * n:
            raise ValueError(f"boundary data has shape {vals.shape}, expected {(m,) * n}")
        self.data = vals.ravel()

    def diffs(self, v):
        return np.stack([D @ v for D in self.D])


def _flat(v, P):
    if isinstance(v, GridField):
        if v.m != P.m or v.n != P.n:
            raise ValueError("field does not match the problem lattice")
        return v.values.ravel()
    v = np.asarray(v, dtype=float)
    if v.size != P.m ** P.n:
        raise ValueError(f"expected {P.m ** P.n} nodal values, got {v.size}")
    return v.ravel()


def _smoothed_abs(z, delta):
    """phi(z) = sqrt(z^2 + delta^2) - delta with its first two derivatives (|z| at delta = 0)."""
    if delta == 0.0:
        return np.abs(z), np.sign(z), np.zeros_like(z)
    r = np.sqrt(z * z + delta * delta)
    return r - delta, z / r, delta * delta / r ** 3


def energy(v, P, delta=0.0):
    """Discrete energy of the nodal field ``v`` (GridField or flat array).

    ``delta > 0`` replaces each |z_k| by sqrt(z_k^2 + delta^2) - delta.
    """
    g = P.grid
    s = np.sum(_smoothed_abs(g.diffs(_flat(v, P)), delta)[0], axis=0)
    return float(g.weight * np.sum(P.integrand(g.x_dual, s)))


def _curvature(P, x, s, rel=1e-4):
    """d/ds of the integrand slope by central differences (one-sided at s = 0)."""
    hs = np.maximum(s, 1e-8) * rel
    lo = np.maximum(s - hs, 0.0)
    return (P.integrand_slope(x, s + hs) - P.integrand_slope(x, lo)) / (s + hs - lo)


class _State:
    """Energy, gradient and a generalized Hessian at one iterate."""

    def __init__(self, v, P, delta, curv_delta):
        g = P.grid
        dz = g.diffs(v)
        phi, dphi, _ = _smoothed_abs(dz, delta)
        s = np.sum(phi, axis=0)
        self.E = float(g.weight * np.sum(P.integrand(g.x_dual, s)))
        slope = P.integrand_slope(g.x_dual, s)
        self.grad = g.weight * sum(D.T @ (slope * dphi[k]) for k, D in enumerate(g.D))
        self._parts = (dz, s, slope, dphi, curv_delta)

    def hessian(self, P):
        g = P.grid
        dz, s, slope, dphi, cd = self._parts
        d2 = _smoothed_abs(dz, cd)[2] if cd > 0 else np.zeros_like(dz)
        curv = np.maximum(_curvature(P, g.x_dual, s), 0.0)
        B = sum(sp.diags(dphi[k]) @ D for k, D in enumerate(g.D))
        M = B.T @ sp.diags(curv) @ B + sum(D.T @ sp.diags(slope * d2[k]) @ D
                                           for k, D in enumerate(g.D))
        M = M.tocsr()[g.free][:, g.free]
        ridge = 1e-12 * max(float(M.diagonal().max()), 1e-300)
        return g.weight * (M + ridge * sp.identity(M.shape[0]))


@dataclass
class Solution:
    u: GridField
    energy_trace: list
    converged: bool
    iterations: int
    problem: Problem = field(repr=False, default=None)
    warm_iterations: int = 0

    @property
    def energy(self):
        return self.energy_trace[-1]

    def save(self, path):
        write_mogrid(path, self.u)


def _laplace_fill(P):
    g = P.grid
    L = sum(D.T @ D for D in g.D).tocsr()
    v = g.data.copy()
    fr, fx = g.free, g.fixed
    rhs = -(L[fr][:, fx] @ v[fx])
    v[fr] = spsolve(L[fr][:, fr].tocsc(), rhs)
    return v


def _initial(P, init, seed):
    g = P.grid
    if isinstance(init, str):
        if init == "laplace":
            return _laplace_fill(P)
        v = g.data.copy()
        if init == "zero":
            v[g.free] = 0.0
        elif init == "random":
            rng = np.random.default_rng(seed)
            v[g.free] = rng.uniform(np.min(g.data), np.max(g.data) + 1e-12, g.free.sum())
        else:
            raise ValueError(f"unknown init {init!r}")
        return v
    v = _flat(init, P).copy()
    v[g.fixed] = g.data[g.fixed]
    return v


def _descend(v, P, delta, curv_delta, tol, xtol, max_iter, armijo, shrink, trace=None):
    """Damped Newton-type descent on the (smoothed) energy; returns (v, iterations, converged)."""
    fr = P.grid.free
    st = _State(v, P, delta, curv_delta)
    if not np.isfinite(st.E):
        raise NumericError("energy is not finite at the starting point")
    quiet = 0
    for it in range(1, max_iter + 1):
        gf = st.grad[fr]
        if not np.any(gf) or st.E == 0.0:
            return v, it - 1, True
        d = spsolve(st.hessian(P).tocsc(), -gf)
        slope0 = float(gf @ d)
        if not np.all(np.isfinite(d)) or slope0 >= 0:
            d = -gf
            slope0 = -float(gf @ gf)
        t = 1.0
        while True:
            trial = v.copy()
            trial[fr] += t * d
            E_new = energy(trial, P, delta)
            if np.isfinite(E_new) and E_new <= st.E + armijo * t * slope0:
                break
            t *= shrink
            if t < 1e-20:
                # no representable decrease along d: stationary at machine precision
                return v, it, abs(slope0) <= tol * max(st.E, 1e-300) or quiet > 0
        dec = st.E - E_new
        v = trial
        st = _State(v, P, delta, curv_delta)
        if trace is not None:
            trace.append(st.E)
        rel = dec / max(st.E, 1e-300)
        small_step = t * float(np.max(np.abs(d))) <= xtol * (1.0 + float(np.max(np.abs(v))))
        quiet = quiet + 1 if rel <= tol else 0
        if st.E == 0.0 or (rel <= tol and (small_step or quiet >= 3)):
            return v, it, True
    return v, max_iter, False


def solve(P, tol=1e-10, max_iter=500, init="laplace", seed=None, xtol=1e-12,
          armijo=1e-4, shrink=0.5, continuation=True, stage_iter=40, delta_min_rel=1e-8):
    """Minimize the discrete energy over the free nodes.

    A warm start runs damped Newton on smoothed energies with decreasing
    delta; the reported run then descends the exact energy with Armijo
    backtracking (sufficient decrease 1e-4, shrink 0.5), so its energy trace
    never increases.
    """
    g = P.grid
    v = _initial(P, init, seed)
    scale = float(np.mean(np.abs(g.diffs(v)))) if v.size else 0.0
    delta_min = delta_min_rel * max(scale, 1e-12)
    warm = 0
    if continuation and scale > 0:
        delta = 0.1 * scale
        while delta > delta_min:
            v, k, _ = _descend(v, P, delta, delta, 1e-12, xtol, stage_iter, armijo, shrink)
            warm += k
            delta *= 0.1
    trace = [energy(v, P)]
    if not np.isfinite(trace[0]):
        raise NumericError("initial energy is not finite")
    v, it, ok = _descend(v, P, 0.0, delta_min, tol, xtol, max_iter, armijo, shrink, trace)
    u = GridField(P.domain, P.m, v.reshape((P.m,) * P.n))
    return Solution(u, trace, ok, it, P, warm)


@dataclass
class Certificate:
    passed: bool
    worst_drop: float
    checked: int
    delta: float


def certificate(sol, delta=1e-4, samples=64, directions=8, seed=0, rel=1e-12):
    """Discrete local-minimizer check against single-node and random multi-node moves."""
    P = sol.problem
    g = P.grid
    v = sol.u.values.ravel()
    E0 = energy(v, P)
    rng = np.random.default_rng(seed)
    free_idx = np.nonzero(g.free)[0]
    pick = rng.choice(free_idx, size=min(samples, free_idx.size), replace=False)
    worst = -np.inf
    count = 0
    for i in pick:
        for sgn in (1.0, -1.0):
            w = v.copy()
            w[i] += sgn * delta
            worst = max(worst, E0 - energy(w, P))
            count += 1
    for _ in range(directions):
        w = v.copy()
        w[free_idx] += delta * rng.standard_normal(free_idx.size) / np.sqrt(free_idx.size)
        worst = max(worst, E0 - energy(w, P))
        count += 1
    return Certificate(bool(worst <= rel * max(E0, 1e-300)), float(worst), count, delta)


# ---------------------------------------------------------------- interior scans

def scan_family(domain, m, max_depth=3, min_cells=4):
    """Interior dyadic cubes (R at most a quarter of the domain) with aligned half-cubes."""
    deepest = max_depth
    while deepest >= 2 and m // 2 ** deepest < min_cells:
        deepest -= 1
    if deepest < 2:
        raise ConditionError(f"lattice with m={m} is too coarse for interior scans")
    return interior_dyadic_cubes(domain, 2, deepest)


def gradient_energy_density(u, A, magnitude="sum"):
    """Cell field A(x, |grad u|) with forward differences."""
    grad = gradient_field(u).magnitude(magnitude)
    return u.with_values(A(u.centers(), grad.values))


@dataclass
class CaccioppoliReport:
    rows: list
    c5_envelope: dict
    theta: float

    def envelope(self, c6=0.0):
        return self.c5_envelope[c6]


def caccioppoli_scan(u, A, cubes, c6_grid=(0.0, 1e-3, 1e-2, 1e-1, 1.0), magnitude="sum"):
    """Measured constants in  avg_{Q/2} A(|grad u|) <= c5 avg_Q A(|u - u_Q|/R) + c6."""
    dens = gradient_energy_density(u, A, magnitude)
    pts = u.centers()
    rows = []
    for Q in cubes:
        R = Q.half_width
        inner = Q.concentric(R / 2)
        lhs = cube_average(dens, inner)
        osc = np.abs(u.values - cube_average(u, Q)) / R
        rhs0 = cube_average(u.with_values(A(pts, osc)), Q)
        c5 = 0.0 if lhs == 0 else (lhs / rhs0 if rhs0 > 0 else np.inf)
        mod_in = lhs * inner.volume
        mod_out = cube_average(dens, Q) * Q.volume
        theta = mod_in / mod_out if mod_out > 0 else 0.0
        rows.append({"cube": Q.label(), "R": R, "lhs": lhs, "rhs0": rhs0, "c5": c5, "theta": theta})
    env = {}
    for c6 in c6_grid:
        need = [max(r["lhs"] - c6, 0.0) / r["rhs0"] if r["rhs0"] > 0
                else (0.0 if r["lhs"] <= c6 else np.inf) for r in rows]
        env[float(c6)] = float(max(need)) if need else 0.0
    return CaccioppoliReport(rows, env, float(max((r["theta"] for r in rows), default=0.0)))


def composite_ctrl(pair):
    """c = A_ctrl o (Astar_ctrl)^-1 from a (lower control of A, lower control of A*) pair."""
    a_ctrl, astar_ctrl = pair
    return compose(a_ctrl, inverse_ctrl(astar_ctrl))


def _prereqs_hold(checks):
    for chk in checks or ():
        ok = chk.all_hold if hasattr(chk, "all_hold") else bool(getattr(chk, "verdict", chk))
        if not ok:
            return False, chk
    return True, None


def reverse_holder_scan(u, A, ctrl_pair, cubes, checks=None, magnitude="sum"):
    """Minimal b for the reverse inequality of the unit-average density A(x, |grad u|)."""
    ok, bad = _prereqs_hold(checks)
    if not ok:
        raise ConditionError(f"prerequisite check failed: {bad}")
    dens = gradient_energy_density(u, A, magnitude)
    avg = cube_average(dens)
    if not avg > 0:
        return 0.0
    gn = dens.with_values(dens.values / avg)
    b, _ = reverse_constant(gn, composite_ctrl(ctrl_pair), cubes)
    return float(b)


def solve_T0(a_ctrl, lo=1e-6, hi=1e6, iters=200):
    """T0 with hat(a_ctrl)(T0) = 1; flagged when the root lies below 1."""
    ah = hat(a_ctrl)
    f = lambda t: float(ah(t)) - 1.0
    if np.sign(f(lo)) == np.sign(f(hi)):
        return 1.0, False
    a, b = np.log(lo), np.log(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if f(np.exp(mid)) < 0:
            a = mid
        else:
            b = mid
    root = float(np.exp(0.5 * (a + b)))
    return max(root, 1.0), bool(root >= 1.0 - 1e-9)


@dataclass
class PhiGainReport:
    rows: list
    eps_grid: list
    verdict: dict
    eps_star: float | None
    b_per_mesh: dict
    failed: list

    def csv_rows(self):
        return [(r["mesh"], r["eps"], r["lhs_modular"], r["rhs"], r["ratio"],
                 self.verdict.get(r["eps"], False)) for r in self.rows]


def phi_gain_report(P, mesh_ladder, eps_grid, ctrl_pair, cube=None, stability=0.1,
                    solve_opts=None, scan_depth=3, checks=None):
    """Phi-modular ratios on a mesh ladder; eps* is the largest eps stable across the two finest meshes.

    ``checks`` are prerequisite reports (composite conditions, log-Hoelder);
    a failing one aborts before any solve.
    """
    solve_opts = solve_opts or {}
    ok, bad = _prereqs_hold(checks)
    if not ok:
        raise ConditionError(f"prerequisite check failed: {bad}")
    c = composite_ctrl(ctrl_pair)
    Qr = cube or P.domain.concentric(P.domain.half_width / 2)
    inner = Qr.concentric(Qr.half_width / 2)
    rows, failed, b_mesh = [], [], {}
    ratios = {float(e): [] for e in eps_grid}
    for m in mesh_ladder:
        Pm = replace(P, m=m)
        try:
            sol = solve(Pm, **solve_opts)
        except (NumericError, ValueError) as exc:
            failed.append((m, str(exc)))
            continue
        dens = gradient_energy_density(sol.u, P.A)
        b_mesh[m] = reverse_holder_scan(sol.u, P.A, ctrl_pair, scan_family(P.domain, m, scan_depth))
        gin = dens.block(inner)
        avg_in = cube_average(dens, inner)
        avg_r = cube_average(dens, Qr)
        for e in eps_grid:
            Phi = m_function(c, e)
            lhs = float(np.mean(Phi(gin)))
            rhs = float(Phi(avg_r + 1.0))
            r = lhs / rhs
            ratios[float(e)].append(r)
            rows.append({"mesh": m, "eps": float(e), "lhs_modular": lhs, "rhs": rhs, "ratio": r,
                         "avg_inner": avg_in, "avg_outer": avg_r, "converged": sol.converged})
    verdict = {}
    for e, rs in ratios.items():
        ok = len(rs) >= 2 and all(np.isfinite(rs)) and abs(rs[-1] / rs[-2] - 1) <= stability
        verdict[e] = bool(ok and not failed)
    passing = [e for e in sorted(verdict) if verdict[e]]
    eps_star = max(passing) if passing else None
    return PhiGainReport(rows, [float(e) for e in eps_grid], verdict, eps_star, b_mesh, failed)
