"""The nine acceptance criteria, one test each.

Every test appends a PASS/FAIL line that the conftest hook prints at the end
of the session, then asserts.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from oracles import brute_force_cz, cells_outside, exact_mean, random_field

from musielak.control import (ALPHA_GRID, check_log_holder, composite_condition_check, compose,
                              from_callable, hat, piecewise_power, power_ctrl, star, table_ctrl, tilde)
from musielak.cube import Cube, dyadic_cubes
from musielak.czg import cz_decompose, gehring_check
from musielak.field import GridField, poincare_ratio
from musielak.minimize import Problem, certificate, phi_gain_report, scan_family, solve
from musielak.nfunction import (SamplingPlan, musielak_derivative, power, power_px,
                                sobolev_conjugate, upper_conjugate, young_conjugate)
from musielak.varexp import PField, closed_form_crosscheck, log_holder_modulus, make_varexp


def record(number, title, ok, detail, started):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"[{number}] {status}  {title}: {detail} ({time.perf_counter() - started:.1f} s)")
    print(ACCEPTANCE_LINES[-1])
    return ok


def rel_err(a, b):
    return float(np.max(np.abs(np.asarray(a) - b) / np.abs(b)))


# ---------------------------------------------------------------- 1

def test_1_hat_involution_and_composition():
    t0 = time.perf_counter()
    x = np.geomspace(1e-3, 1e3, 64)
    families = [
        power_ctrl(1.5),
        power_ctrl(3.0),
        piecewise_power(3.0, 2.0),
        piecewise_power(2.2, 2.8),
        from_callable(lambda a: a ** 2 * (1 + np.log1p(a)), name="a^2(1+log(1+a))"),
        table_ctrl(ALPHA_GRID, ALPHA_GRID ** 2.5 * (1 + 0.1 * np.tanh(np.log(ALPHA_GRID)))),
        star(power_ctrl(2.0), 4),
        tilde(power_ctrl(3.0)),
    ]
    worst_inv = worst_comp = 0.0
    for i, c in enumerate(families):
        d = families[(i + 1) % len(families)]
        worst_inv = max(worst_inv, rel_err(hat(hat(c))(x), c(x)), rel_err(1 / hat(c)(1 / x), c(x)))
        lhs = compose(hat(c), hat(d))(x)
        rhs = hat(compose(c, d))(x)
        worst_comp = max(worst_comp, rel_err(lhs, rhs))
    ok = worst_inv <= 1e-12 and worst_comp <= 1e-12 and time.perf_counter() - t0 < 1
    record(1, "hat involution and composition", ok,
           f"8 families x 64 points, involution err {worst_inv:.2e}, composition err {worst_comp:.2e}", t0)
    assert ok


# ---------------------------------------------------------------- 2

def test_2_young_machinery():
    t0 = time.perf_counter()
    t = np.geomspace(1e-3, 1e3, 121)
    x = np.array([0.5])
    worst_bi = worst_eq = 0.0
    for p in (1.5, 2.0, 3.0):
        A = power(p)
        At = young_conjugate(A)
        worst_bi = max(worst_bi, rel_err(young_conjugate(At)(x, t), A(x, t)))
        s = musielak_derivative(A, x, t)
        worst_eq = max(worst_eq, rel_err(A(x, t) + At(x, s), s * t))
        grid_s = np.geomspace(1e-3, 1e3, 41)
        gap = A(x, t)[:, None] + At(x, grid_s)[None, :] - np.outer(t, grid_s)
        worst_eq = max(worst_eq, float(max(0.0, -np.min(gap / np.outer(t, grid_s)))))
    ok = worst_bi <= 1e-6 and worst_eq <= 1e-6 and time.perf_counter() - t0 < 5
    record(2, "Young machinery", ok,
           f"p in {{1.5, 2, 3}}, biconjugate err {worst_bi:.2e}, Young equality err {worst_eq:.2e}", t0)
    assert ok


# ---------------------------------------------------------------- 3

def test_3_conjugate_identities():
    t0 = time.perf_counter()
    t = np.geomspace(1e-2, 1e2, 41)
    worst_round = 0.0
    for p in (2.5, 3.0):
        A = power(p, 4)
        back = sobolev_conjugate(upper_conjugate(A))
        x = np.full(4, 0.5)
        worst_round = max(worst_round, rel_err(back(x, t), A(x, t)))
    pfield = PField("smooth", 4, p0=2.5, amplitude=0.3)
    Ax = power_px(pfield, 4)
    back = sobolev_conjugate(upper_conjugate(Ax))
    rng = np.random.default_rng(0)
    for x in rng.uniform(0.05, 0.95, size=(4, 4)):
        worst_round = max(worst_round, rel_err(back(x, t), Ax(x, t)))
    worst_closed = 0.0
    all_hold = True
    for pf in (PField("constant", 4, p0=2.5), PField("constant", 4, p0=3.0), pfield):
        rep = closed_form_crosscheck(pf)
        all_hold &= rep.all_hold
        for name in ("upper_conjugate", "sobolev_conjugate", "young_conjugate"):
            worst_closed = max(worst_closed, rep[name].witness["max_rel_err"])
    ok = worst_round <= 1e-4 and worst_closed <= 1e-6 and all_hold and time.perf_counter() - t0 < 30
    record(3, "conjugate identities", ok,
           f"(A*)_* = A err {worst_round:.2e}, closed-form err {worst_closed:.2e}", t0)
    assert ok


# ---------------------------------------------------------------- 4

def test_4_cz_decomposition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = bound_violations = complement_violations = 0
    selected = 0
    for k in range(200):
        n = 1 + k % 2
        depth = int(rng.integers(1, 7))
        G = random_field(rng, Cube.unit(n), depth)
        s = exact_mean(G) * float(rng.uniform(1.0, 6.0))
        if s == 0:
            s = 1.0
        out = cz_decompose(G, s)
        got = {q.label(): a for q, a in zip(out.cubes, out.averages)}
        mismatches += got != brute_force_cz(G, s)
        bound_violations += sum(not (s < a <= 2 ** n * s) for a in out.averages)
        complement_violations += int(np.sum(G.values[cells_outside(G, out.cubes)] > s))
        selected += len(out)
    ok = (mismatches == 0 and bound_violations == 0 and complement_violations == 0
          and time.perf_counter() - t0 < 30)
    record(4, "Calderon-Zygmund decomposition", ok,
           f"200 fields, {selected} cubes, {mismatches} mismatches, "
           f"{bound_violations} bound and {complement_violations} complement violations", t0)
    assert ok


# ---------------------------------------------------------------- 5

def test_5_gehring_lemma():
    t0 = time.perf_counter()
    t = np.exp(np.arange(0.0, 100.0, 1e-4))
    details, ok = [], True
    for p, beta in ((2, 3), (2, 4), (3, 5)):
        a = beta / (beta + 1 - p)
        eps = [0.0, 0.5 / (a - 1), 0.9 / (a - 1)]
        rep = gehring_check(t, lambda s: s ** -float(beta), np.zeros(t.size),
                            lambda s: s ** (p - 1.0), a, 0.0, eps, tol=1e-6)
        exact = [beta / (beta - (p - 1) * (1 + e)) for e in eps]
        worst = max(abs(r["lhs"] / x - 1) for r, x in zip(rep.rows, exact))
        ok &= rep.verdict and worst <= 1e-6
        details.append(f"({p},{beta}) a={a:g} err {worst:.1e}")
    ok &= time.perf_counter() - t0 < 5
    record(5, "Gehring lemma", ok, ", ".join(details), t0)
    assert ok


# ---------------------------------------------------------------- 6

def test_6_minimizer_correctness():
    t0 = time.perf_counter()
    m = 64
    worst_err = worst_energy = 0.0
    ok = True
    for n, coeffs in ((1, [1.0]), (2, [1.0, 0.5])):
        c = np.asarray(coeffs)
        for p in (1.5, 2.0, 3.0):
            P = Problem(power(p, n), m, lambda x: x @ c)
            sol = solve(P, init="random", seed=7)
            exact_u = sol.u.centers() @ c
            err = float(np.max(np.abs(sol.u.values - exact_u)))
            e_err = abs(sol.energy - np.sum(np.abs(c)) ** p)
            worst_err, worst_energy = max(worst_err, err), max(worst_energy, e_err)
            ok &= (sol.converged and err <= 1e-6 and e_err <= 1e-8
                   and bool(np.all(np.diff(sol.energy_trace) <= 0)) and certificate(sol).passed)
    ok &= time.perf_counter() - t0 < 60
    record(6, "minimizer correctness", ok,
           f"1D and 2D, p in {{1.5, 2, 3}}, m=64, nodal err {worst_err:.1e}, energy err {worst_energy:.1e}", t0)
    assert ok


# ---------------------------------------------------------------- 7

def test_7_regularity_pipeline():
    t0 = time.perf_counter()
    pf = PField("smooth", 2, p0=2.5, amplitude=0.3)
    B = make_varexp(pf)
    pair = (B.controls["A"], B.controls["A*"])
    lh = log_holder_modulus(pf, depths=())
    cubes = scan_family(pf.domain, 32, 3)
    rho = check_log_holder(B.region_control, cubes, float(np.exp(pf.n * lh.L)))
    comp = composite_condition_check(B.A, cubes, 1.0, SamplingPlan.lattice(pf.domain, 8),
                                     family=B.region_controls, global_pair=pair)
    data = lambda x: np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])
    P = Problem(B.A, 32, data)
    eps_grid = (0.0, 0.1, 0.2, 0.5, 1.0)
    rep = phi_gain_report(P, (32, 64, 128), eps_grid, pair, checks=[rho, comp])

    bs = list(rep.b_per_mesh.values())
    b_ok = len(bs) == 3 and all(np.isfinite(bs)) and max(bs) / min(bs) <= 2
    star_ok = rep.eps_star is not None
    drift = np.inf
    if star_ok:
        r = [row["ratio"] for row in rep.rows if row["eps"] == rep.eps_star]
        drift = abs(r[-1] / r[-2] - 1)
    zero = [row for row in rep.rows if row["eps"] == 0.0]
    plain = all(row["lhs_modular"] == row["avg_inner"] and row["rhs"] == row["avg_outer"] + 1.0
                for row in zero)
    ok = (b_ok and star_ok and drift <= 0.1 and plain and not rep.failed
          and time.perf_counter() - t0 < 300)
    record(7, "regularity pipeline", ok,
           f"b = {', '.join(f'{b:.3f}' for b in bs)}; eps* = {rep.eps_star}, "
           f"ratio drift {drift:.3f}; eps=0 row plain averages: {plain}", t0)
    assert ok


# ---------------------------------------------------------------- 8

def test_8_log_holder_machinery():
    t0 = time.perf_counter()
    root = Cube.unit(2)
    by_depth = {d: dyadic_cubes(root, d) for d in range(1, 7)}
    all_cubes = [q for d in range(1, 7) for q in by_depth[d]]

    const = make_varexp(PField("constant", 2))
    rho_const = check_log_holder(const.region_control, all_cubes, 1.0)
    const_ok = all(r["rho"] == 1.0 for r in rho_const.rows)

    smooth = PField("smooth", 2, p0=2.5, amplitude=0.3)
    lh = log_holder_modulus(smooth)
    bound = float(np.exp(2 * lh.L))
    rho_smooth = check_log_holder(make_varexp(smooth).region_control, all_cubes, bound)
    smooth_ok = lh.verdict and lh.cube_verdict and rho_smooth.verdict

    jump = PField("jump", 2, p0=2.3, jump=0.5)
    lh_jump = log_holder_modulus(jump, depths=())
    ctrl = make_varexp(jump).region_control
    r2 = check_log_holder(ctrl, by_depth[2], np.inf).sup_rho
    r6 = check_log_holder(ctrl, by_depth[6], np.inf).sup_rho
    jump_ok = (not lh_jump.verdict) and r6 / r2 >= 10

    ok = const_ok and smooth_ok and jump_ok and time.perf_counter() - t0 < 10
    record(8, "log-Hoelder machinery", ok,
           f"constant rho=1: {const_ok}; smooth L={lh.L:.3f}, sup rho {rho_smooth.sup_rho:.3f} <= "
           f"e^(nL)={bound:.3f}; jump rho {r2:.0f} -> {r6:.0f} ({r6 / r2:.0f}x)", t0)
    assert ok


# ---------------------------------------------------------------- 9

def test_9_poincare_ratio():
    t0 = time.perf_counter()
    target = 1 / np.sqrt(3)
    ratios = []
    for center, R in ((0.5, 0.5), (0.0, 0.125), (3.0, 2.0), (-1.0, 10.0)):
        dom = Cube((center,), R)
        u = GridField.from_function(dom, 256, lambda x: x[..., 0])
        ratios.append(poincare_ratio(u, power(2, 1, domain=dom), dom))
    err = max(abs(r - target) for r in ratios)
    spread = max(ratios) - min(ratios)
    ok = err <= 1e-4 and spread <= 1e-4 and time.perf_counter() - t0 < 5
    record(9, "Poincare ratio", ok,
           f"u = x, A = t^2, m = 256: max |ratio - 1/sqrt(3)| = {err:.1e}, spread over R {spread:.1e}", t0)
    assert ok
