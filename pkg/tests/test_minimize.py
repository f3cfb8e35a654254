import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from musielak.control import power_ctrl
from musielak.cube import Cube
from musielak.czg import m_function
from musielak.errors import ConditionError, NumericError
from musielak.field import GridField, read_mogrid
from musielak.minimize import (Problem, caccioppoli_scan, certificate, composite_ctrl, energy,
                               gradient_energy_density, phi_gain_report, reverse_holder_scan,
                               scan_family, solve, solve_T0)
from musielak.nfunction import exp_type, power, power_px


def affine_problem(p, n, m, coeffs):
    c = np.asarray(coeffs, dtype=float)
    return Problem(power(p, n), m, lambda x: x @ c), c


def nodal_error(sol, c):
    return float(np.max(np.abs(sol.u.values - sol.u.centers() @ c)))


# ---------------------------------------------------------------- energy

def test_energy_examples():
    P, _ = affine_problem(2, 2, 8, [1, 0])
    x = P.grid
    u1 = GridField.from_function(P.domain, 8, lambda x: x[..., 0])
    u2 = GridField.from_function(P.domain, 8, lambda x: x[..., 0] + x[..., 1])
    assert energy(u1, P) == pytest.approx(1.0, rel=1e-12)
    assert energy(u2, P) == pytest.approx(4.0, rel=1e-12)
    assert energy(np.full(64, 7.0), P) == 0.0
    assert x.weight == pytest.approx(1 / 49)


def test_energy_shape_mismatch():
    P, _ = affine_problem(2, 2, 8, [1, 0])
    with pytest.raises(ValueError):
        energy(np.zeros(10), P)
    with pytest.raises(ValueError):
        energy(GridField(P.domain, 4, np.zeros((4, 4))), P)


@given(st.integers(0, 2 ** 32 - 1), st.floats(1.2, 4.0))
@settings(max_examples=30, deadline=None)
def test_energy_is_convex_along_segments(seed, p):
    P, _ = affine_problem(p, 2, 6, [1, 0])
    rng = np.random.default_rng(seed)
    v, w = rng.normal(size=36), rng.normal(size=36)
    mid = energy(0.5 * (v + w), P)
    assert mid <= 0.5 * (energy(v, P) + energy(w, P)) + 1e-10 * (1 + mid)


def test_oscillating_integrand_sandwich():
    A = power(2.5, 2)
    P = Problem(A, 8, lambda x: x[..., 0], b1=0.7, mode="oscillating")
    rng = np.random.default_rng(0)
    x = rng.random((200, 2))
    s = rng.exponential(size=200) * 3
    f = P.integrand(x, s)
    a = A(x, s)
    assert np.all(P.b2 * a - P.b1 <= f) and np.all(f <= P.b3 * a + P.b1)


def test_problem_validation():
    A = power(2, 2)
    with pytest.raises(ValueError):
        Problem(A, 8, lambda x: x[..., 0], b1=1.0)
    with pytest.raises(ValueError):
        Problem(A, 8, lambda x: x[..., 0], b2=1.5)
    with pytest.raises(ValueError):
        Problem(A, 8, lambda x: x[..., 0], mode="other")
    with pytest.raises(ValueError):
        Problem(A, 2, lambda x: x[..., 0])


# ---------------------------------------------------------------- solver

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_solve_1d_linear(p):
    P, c = affine_problem(p, 1, 64, [1.0])
    sol = solve(P, init="random", seed=1)
    assert sol.converged
    assert nodal_error(sol, c) <= 1e-6
    assert sol.energy == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(sol.energy_trace) <= 0)


def test_solve_constant_data():
    P = Problem(power(2, 2), 16, lambda x: np.full(x.shape[:-1], 2.5))
    sol = solve(P, init="random", seed=0)
    assert np.allclose(sol.u.values, 2.5, atol=1e-10)
    assert sol.energy <= 1e-16


def test_solve_2d_affine_square():
    P, c = affine_problem(2, 2, 32, [1.0, 2.0])
    sol = solve(P, init="zero")
    assert nodal_error(sol, c) <= 1e-8
    assert sol.energy == pytest.approx(9.0, rel=1e-10)


def test_solve_2d_affine_p3_certificate():
    P, c = affine_problem(3, 2, 32, [0.5, -1.0])
    sol = solve(P, init="random", seed=4)
    assert nodal_error(sol, c) <= 1e-6
    cert = certificate(sol)
    assert cert.passed and cert.checked == 2 * 64 + 8


def test_certificate_rejects_perturbed_field():
    P, c = affine_problem(2, 1, 32, [1.0])
    sol = solve(P)
    bumped = sol.u.values.copy()
    bumped[16] += 0.1
    from dataclasses import replace

    bad = replace(sol, u=sol.u.with_values(bumped))
    assert not certificate(bad, samples=30).passed


def test_iteration_cap_reports_not_converged():
    P = Problem(power(2.5, 2), 16, lambda x: np.sin(np.pi * x[..., 0]))
    sol = solve(P, init="random", seed=0, continuation=False, max_iter=1)
    assert not sol.converged and sol.iterations == 1


def test_nonfinite_start_raises():
    P = Problem(exp_type(1), 16, lambda x: 1e4 * x[..., 0])
    with pytest.raises(NumericError):
        solve(P, continuation=False)


def test_unknown_init_rejected():
    P, _ = affine_problem(2, 1, 8, [1.0])
    with pytest.raises(ValueError):
        solve(P, init="cold")


def test_variable_exponent_solve_is_certified(tmp_path):
    A = power_px(lambda x: 2.5 + 0.3 * np.sin(2 * np.pi * x[..., 0]), 2)
    P = Problem(A, 24, lambda x: np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1]))
    sol = solve(P)
    assert sol.converged
    assert np.all(np.diff(sol.energy_trace) <= 0)
    assert certificate(sol).passed
    sol.save(tmp_path / "u.mogrid")
    assert np.array_equal(read_mogrid(tmp_path / "u.mogrid").values, sol.u.values)


# ---------------------------------------------------------------- scans

def test_scan_family_interior_and_coarse_error():
    fam = scan_family(Cube.unit(2), 64, 3)
    assert {q.depth for q in fam} == {2, 3}
    with pytest.raises(ConditionError):
        scan_family(Cube.unit(2), 8, 3)


def test_gradient_density_of_affine():
    u = GridField.from_function(Cube.unit(2), 16, lambda x: x[..., 0] - 2 * x[..., 1])
    assert np.allclose(gradient_energy_density(u, power(2, 2)).values, 9.0)


def test_caccioppoli_linear_field():
    m = 64
    u = GridField.from_function(Cube.unit(1), m, lambda x: x[..., 0])
    fam = scan_family(u.domain, m, 3)
    rep = caccioppoli_scan(u, power(2), fam)
    c5 = [r["c5"] for r in rep.rows]
    # avg of ((x - c)/R)^2 over a cube is 1/3 up to the cell-center rule
    for r in rep.rows:
        cells = 2 * r["R"] * m
        assert r["lhs"] == pytest.approx(1.0)
        assert r["rhs0"] == pytest.approx((1 - 1 / cells ** 2) / 3, rel=1e-12)
        assert r["c5"] == pytest.approx(3 / (1 - 1 / cells ** 2), rel=1e-12)
    # R-independent up to the O(h^2/R^2) midpoint term
    assert max(c5) / min(c5) < 1.02
    assert rep.envelope(0.0) == pytest.approx(max(c5))
    assert rep.theta == pytest.approx(0.5)


def test_caccioppoli_constant_field():
    u = GridField(Cube.unit(2), 32, np.full((32, 32), 1.5))
    rep = caccioppoli_scan(u, power(2, 2), scan_family(u.domain, 32, 3))
    assert all(r["c5"] == 0.0 for r in rep.rows)
    assert all(v == 0.0 for v in rep.c5_envelope.values())


def test_composite_control_constant_exponent():
    n, p = 2, 2.5
    c = composite_ctrl((power_ctrl(p), power_ctrl(n * p / (n + p))))
    t = np.geomspace(1e-3, 1e3, 17)
    assert np.allclose(c(t), t ** ((n + p) / n), rtol=1e-12)
    e = 0.4
    assert np.allclose(m_function(c, e)(t), t ** (1 + e * p / (n + p)), rtol=1e-10)


def test_reverse_holder_affine_is_half():
    n, p = 2, 2.0
    u = GridField.from_function(Cube.unit(2), 32, lambda x: x[..., 0] + x[..., 1])
    pair = (power_ctrl(p), power_ctrl(n * p / (n + p)))
    b = reverse_holder_scan(u, power(p, n), pair, scan_family(u.domain, 32, 3))
    assert b == pytest.approx(0.5)


def test_reverse_holder_refuses_failed_prerequisites():
    class Failed:
        verdict = False

    u = GridField.from_function(Cube.unit(2), 32, lambda x: x[..., 0])
    with pytest.raises(ConditionError):
        reverse_holder_scan(u, power(2, 2), (power_ctrl(2), power_ctrl(1)), [], checks=[Failed()])


def test_solve_T0_power_control():
    T0, flag = solve_T0(power_ctrl(2.5))
    assert T0 == pytest.approx(1.0) and flag


def test_phi_gain_affine_constant_exponent():
    n, p = 2, 2.0
    P = Problem(power(p, n), 16, lambda x: x[..., 0])
    pair = (power_ctrl(p), power_ctrl(n * p / (n + p)))
    rep = phi_gain_report(P, (16, 32), (0.0, 0.5, 1.0), pair)
    assert rep.eps_star == 1.0 and not rep.failed
    eps0 = [r for r in rep.rows if r["eps"] == 0.0]
    for r in eps0:
        assert r["lhs_modular"] == pytest.approx(1.0)
        assert r["ratio"] == pytest.approx(0.5)
    assert rep.b_per_mesh[16] == pytest.approx(0.5) and rep.b_per_mesh[32] == pytest.approx(0.5)
    assert len(rep.csv_rows()) == 6
