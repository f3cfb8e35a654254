"""Dyadic stopping-time decomposition, covering selection and Gehring-type checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import check_growth_condition
from .cube import dyadic_cube_at
from .errors import AlignmentError, ConditionError
from .field import cube_average
from .nfunction import convexity_defect


@dataclass
class CubeSet:
    cubes: list
    threshold: float | None = None
    averages: list = field(default_factory=list)

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def dump_rows(self):
        return [(q.depth, q.label(), avg) for q, avg in zip(self.cubes, self.averages)]


def _dyadic_level(m):
    L = int(round(np.log2(m)))
    if 2 ** L != m:
        raise AlignmentError(f"cells per side must be a power of two, got {m}")
    return L


def block_sums(G):
    """Correctly rounded sums over dyadic blocks, coarsest first: sums[d] has shape (2^d,)*n.

    Every block is summed with fsum from the finest cells, so the result does
    not depend on summation order and agrees bit for bit with any other
    exactly rounded evaluation.
    """
    n = G.n
    L = _dyadic_level(G.m)
    sums = []
    for d in range(L + 1):
        k, w = 2 ** d, G.m // 2 ** d
        v = G.values.reshape(sum(((k, w) for _ in range(n)), ()))
        v = v.transpose(tuple(range(0, 2 * n, 2)) + tuple(range(1, 2 * n, 2)))
        flat = v.reshape(k ** n, w ** n)
        sums.append(np.array([math.fsum(row) for row in flat]).reshape((k,) * n))
    return sums


def cz_decompose(G, s):
    """Maximal dyadic cubes with average > s, found by walking down from the root.

    Averages are exactly rounded sums divided by a power of two, so each parent
    average is the correctly rounded mean of its children and s < avg <= 2^n s
    holds in floating point.
    """
    if np.any(G.values < 0):
        raise ValueError("decomposition expects a nonnegative field")
    n = G.n
    L = _dyadic_level(G.m)
    sums = block_sums(G)
    root_avg = sums[0].reshape(()) / G.m ** n
    if root_avg > s:
        raise ConditionError(f"root average {root_avg:.6g} exceeds the threshold {s:.6g}")
    children = [tuple((j >> (n - 1 - k)) & 1 for k in range(n)) for j in range(2 ** n)]
    cubes, avgs = [], []
    stack = [(0, (0,) * n)]
    while stack:
        d, idx = stack.pop()
        if d == L:
            continue
        cells = 2 ** (n * (L - d - 1))
        kids = []
        for off in children:
            cidx = tuple(2 * i + o for i, o in zip(idx, off))
            avg = sums[d + 1][cidx] / cells
            if avg > s:
                cubes.append(dyadic_cube_at(G.domain, d + 1, cidx))
                avgs.append(float(avg))
            else:
                kids.append((d + 1, cidx))
        stack.extend(reversed(kids))
    return CubeSet(cubes, s, avgs)


def vitali_select(cubes):
    """Greedy disjoint subfamily, largest cubes first (stable for ties)."""
    order = sorted(range(len(cubes)), key=lambda i: -cubes[i].half_width)
    chosen = []
    for i in order:
        q = cubes[i]
        if not any(q.interiors_meet(c) for c in chosen):
            chosen.append(q)
    return CubeSet(chosen)


def level_integral(G, t):
    """h^n * sum of G over the cells where G > t."""
    v = G.values
    return float(G.h ** G.n * np.sum(v[v > t]))


# ---------------------------------------------------------------- Gehring lemma

def _tail_stieltjes(t, w, h, rule):
    """-int_{t_i}^inf w dh for h tabulated on t and dropping to 0 after t[-1]."""
    dh = h[:-1] - h[1:]
    if rule == "trapezoid":
        pieces = 0.5 * (w[:-1] + w[1:]) * dh
    elif rule == "right":
        pieces = w[1:] * dh
    else:
        raise ValueError(f"unknown Stieltjes rule {rule!r}")
    tail = np.zeros_like(t, dtype=float)
    tail[:-1] = np.cumsum(pieces[::-1])[::-1]
    return tail + w[-1] * h[-1]


@dataclass
class GehringReport:
    hypothesis_ok: bool
    worst_hypothesis_ratio: float
    rows: list

    @property
    def verdict(self):
        return self.hypothesis_ok and all(r["holds"] for r in self.rows)


def gehring_check(t, h, H, B, a, C, eps, rule="trapezoid", tol=1e-6):
    """Verify the level-set hypothesis on the grid, then the integrated conclusion.

    ``t`` starts at B^{-1}(1); ``h`` and ``H`` are nonincreasing tables (or
    callables) on ``t`` and are taken to vanish beyond ``t[-1]``.
    """
    t = np.asarray(t, dtype=float)
    h = np.asarray(h(t) if callable(h) else h, dtype=float)
    H = np.asarray(H(t) if callable(H) else H, dtype=float)
    if np.any(np.diff(h) > 0) or np.any(np.diff(H) > 0):
        raise ValueError("h and H must be nonincreasing")
    Bt = np.asarray(B(t), dtype=float)
    if abs(Bt[0] - 1.0) > 1e-9:
        raise ValueError("the grid must start at B^{-1}(1)")
    if not a > 1:
        raise ValueError("a must exceed 1")

    lhs_hyp = _tail_stieltjes(t, Bt, h, rule)
    rhs_hyp = a * Bt * h + C * H
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(rhs_hyp > 0, lhs_hyp / rhs_hyp, np.where(lhs_hyp > 0, np.inf, 0.0))
    worst = float(np.max(ratio))
    hyp_ok = worst <= 1 + tol

    I0 = float(lhs_hyp[0])
    rows = []
    for e in np.atleast_1d(eps):
        e = float(e)
        if not 0 <= e < 1.0 / (a - 1):
            raise ValueError(f"eps={e} outside [0, 1/(a-1))")
        denom = 1.0 - e * (a - 1)
        Be = Bt ** (1 + e)
        lhs = float(_tail_stieltjes(t, Be, h, rule)[0])
        hterm = float(_tail_stieltjes(t, Be, H, rule)[0])
        rhs = I0 / denom + C * e / denom * hterm
        holds = (lhs <= rhs * (1 + tol) + 1e-300) if hyp_ok else None
        rows.append({"eps": e, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs,
                     "coef_main": 1.0 / denom, "coef_tail": C * e / denom,
                     "holds": bool(holds) if holds is not None else False,
                     "asserted": hyp_ok})
    return GehringReport(bool(hyp_ok), worst, rows)


# ---------------------------------------------------------------- Theorem-style experiment

@dataclass
class HIReport:
    b_est: float
    eps_grid: list
    m_modular: list
    rhs: list
    ratio: list
    ratio_coarse: list
    verdict: list
    depth_verified: int
    t1: float
    monotone_verdicts: bool = True
    per_cube: list = field(default_factory=list)

    def csv_rows(self):
        return list(zip(self.eps_grid, self.m_modular, self.rhs, self.ratio, self.verdict))


def crossing_point(c, lo=1e-6, hi=1e6, iters=200):
    """t1 with c(t1) = t1, by bisection of log(c(t)/t) in log t."""
    f = lambda t: np.log(c(t) / t)
    flo, fhi = f(lo), f(hi)
    if np.sign(flo) == np.sign(fhi):
        raise ConditionError("c(t) - t does not change sign on [1e-6, 1e6]")
    a, b = np.log(lo), np.log(hi)
    for _ in range(iters):
        m = 0.5 * (a + b)
        if np.sign(f(np.exp(m))) == np.sign(flo):
            a = m
        else:
            b = m
    return float(np.exp(0.5 * (a + b)))


def m_function(c, eps):
    """M(t) = t (t / c^{-1}(t))^eps with M(0) = 0."""
    def M(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        tp = t[pos]
        out[pos] = tp * (tp / c.inverse(tp)) ** eps
        return out[()]
    return M


def reverse_constant(g, c, cubes):
    """Smallest b with avg_{Q/2} g <= b c(avg_Q c^{-1}(g)) + b over the cubes."""
    cinv = c.inverse(g.values)
    inv_field = g.with_values(cinv)
    worst, rows = 0.0, []
    for Q in cubes:
        inner = Q.concentric(Q.half_width / 2)
        lhs = cube_average(g, inner)
        base = float(c(cube_average(inv_field, Q))) + 1.0
        b = lhs / base
        rows.append((Q.label(), Q.half_width, b))
        worst = max(worst, b)
    return worst, rows


def scan_cubes(root, m, depth, min_cells=4):
    """Dyadic cubes down to ``depth`` whose concentric half-cube is lattice aligned."""
    out = [root]
    n = root.dim
    for d in range(1, depth + 1):
        if m // 2 ** d < min_cells:
            break
        for idx in np.ndindex(*(2 ** d,) * n):
            out.append(dyadic_cube_at(root, d, idx))
    return out


def higher_integrability(g, c, b=None, eps_grid=(0.0, 0.1, 0.2, 0.5), depth=3,
                         stability=0.1, convex_rtol=1e-2):
    if g.m % 2:
        raise AlignmentError("higher-integrability scan needs an even lattice")
    avg = cube_average(g)
    if not avg > 0:
        raise ConditionError("cannot normalize a field with zero average")
    gn = g.with_values(g.values / avg)

    grid = np.geomspace(1e-4, 1e4, 129)
    if not check_growth_condition(c, "delta").verdict:
        raise ConditionError("c fails the Delta_R+ grid check")
    if convexity_defect(c, grid) > convex_rtol or not c(grid[-1]) / grid[-1] > 10 * c(grid[0]) / grid[0]:
        raise ConditionError("c fails the N-function proxy (convexity / growth)")
    t1 = crossing_point(c)

    cubes = scan_cubes(g.domain, g.m, depth)
    b_est, per_cube = reverse_constant(gn, c, cubes)
    depth_verified = max(q.depth for q in cubes)

    root = g.domain
    half = root.concentric(root.half_width / 2)
    coarse = gn.coarsen()
    mm, rr, ratio, ratio_c, verdict = [], [], [], [], []
    for e in eps_grid:
        M = m_function(c, e)
        lhs = float(np.mean(M(gn.block(half))))
        rhs = float(M(cube_average(gn) + 1.0))
        lhs_c = float(np.mean(M(coarse.block(half))))
        rhs_c = float(M(cube_average(coarse) + 1.0))
        r, rc = lhs / rhs, lhs_c / rhs_c
        mm.append(lhs)
        rr.append(rhs)
        ratio.append(r)
        ratio_c.append(rc)
        verdict.append(bool(np.isfinite(r) and np.isfinite(rc) and abs(r / rc - 1) <= stability))
    mono = all(verdict[i] or not verdict[i + 1] for i in range(len(verdict) - 1))
    rep = HIReport(b_est, list(map(float, eps_grid)), mm, rr, ratio, ratio_c, verdict,
                   depth_verified, t1, mono, per_cube)
    if b is not None and b_est > b:
        rep.verdict = [False] * len(verdict)
    return rep
