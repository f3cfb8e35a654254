import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from musielak.control import (ALPHA_GRID, check_growth_condition, check_log_holder, compose,
                              fit_control, from_callable, hat, inverse_ctrl, piecewise_power,
                              power_ctrl, star, table_ctrl, tilde)
from musielak.cube import Cube, dyadic_cubes
from musielak.errors import ConditionError
from musielak.nfunction import SamplingPlan, power_px

GRID = np.geomspace(1e-3, 1e3, 64)


def close(a, b, rel=1e-12):
    return np.max(np.abs(np.asarray(a) - b) / np.abs(b)) <= rel


def test_control_value_at_zero():
    assert power_ctrl(2)(0.0) == 0.0
    assert hat(power_ctrl(2))(0.0) == 0.0


def test_hat_of_piecewise_swaps_branches():
    c = piecewise_power(3, 2)
    ch = hat(c)
    assert ch.exponents == (2.0, 3.0)
    assert close(ch(GRID), 1 / c(1 / GRID))


def test_hat_is_involution_by_identity():
    c = from_callable(lambda a: a ** 2 * (1 + np.log1p(a)))
    assert hat(hat(c)) is c


def test_hat_of_generic_callable_matches_definition():
    c = from_callable(lambda a: a ** 2 * (1 + np.log1p(a)))
    assert close(hat(c)(GRID), 1 / c(1 / GRID))


def test_star_of_square_in_four_dims():
    assert close(star(power_ctrl(2), 4)(GRID), GRID ** 4, 1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_tilde_power(p):
    assert close(tilde(power_ctrl(p))(GRID), GRID ** (p / (p - 1)), 1e-9)


def test_star_rejects_fast_growth():
    with pytest.raises(ConditionError):
        star(power_ctrl(5), 4)


def test_tilde_rejects_linear():
    with pytest.raises(ConditionError):
        tilde(power_ctrl(1))


@pytest.mark.parametrize("c", [power_ctrl(2.5), piecewise_power(1.8, 2.6)])
def test_hat_commutes_with_star_and_tilde(c):
    assert close(hat(star(c, 4))(GRID), star(hat(c), 4)(GRID), 1e-9)
    assert close(hat(tilde(c))(GRID), tilde(hat(c))(GRID), 1e-9)


@given(st.floats(1.1, 4.0), st.floats(1.1, 4.0), st.floats(1e-3, 1e3))
@settings(max_examples=50, deadline=None)
def test_inverse_and_compose_roundtrip(b, a, x):
    c = piecewise_power(b, a)
    assert c.inverse(c(x)) == pytest.approx(x, rel=1e-12)
    assert compose(c, inverse_ctrl(c))(x) == pytest.approx(x, rel=1e-12)
    assert hat(c)(x) * c(1 / x) == pytest.approx(1.0, rel=1e-12)


def test_table_ctrl_reproduces_power_on_grid():
    c = table_ctrl(ALPHA_GRID, ALPHA_GRID ** 2.5)
    assert close(c(GRID), GRID ** 2.5, 1e-9)
    assert close(c.inverse(GRID ** 2.5), GRID, 1e-9)


def test_table_ctrl_rejects_nonmonotone():
    with pytest.raises(ConditionError):
        table_ctrl([1.0, 2.0, 3.0], [1.0, 0.5, 2.0])


def test_fit_control_recovers_exponents():
    A = power_px(lambda x: 2.5 + 0.1 * np.sin(2 * np.pi * x[..., 0]), 1)
    plan = SamplingPlan(np.linspace(0, 1, 401)[:, None])
    c = fit_control(A, A.domain, plan)
    lo, hi = ALPHA_GRID[:2], ALPHA_GRID[-2:]
    slope_lo = np.diff(np.log(c(lo))) / np.diff(np.log(lo))
    slope_hi = np.diff(np.log(c(hi))) / np.diff(np.log(hi))
    assert slope_lo[0] == pytest.approx(2.6, abs=1e-3)
    assert slope_hi[0] == pytest.approx(2.4, abs=1e-3)
    # it is a lower control: A(x, a t) >= c(a) A(x, t) on the samples
    x = plan.x_points
    for a in (0.01, 0.5, 3.0, 100.0):
        assert np.all(A(x, a * 1.7) >= c(a) * A(x, 1.7) * (1 - 1e-12))


def test_growth_condition_prefers_unit_multiplier():
    rep = check_growth_condition(piecewise_power(3, 2), "delta")
    assert rep.verdict and rep.M0 == 1.0
    assert rep.M1 > 0 and np.isfinite(rep.M2)


def test_nabla_growth_for_power():
    rep = check_growth_condition(power_ctrl(2), "nabla")
    assert rep.verdict
    assert rep.M1 == pytest.approx(rep.M2)


def test_growth_condition_fails_for_wrong_orientation():
    # a^2 below and a^3 above: the product c(ab) outgrows c(a)c(b) for a<1<b
    rep = check_growth_condition(piecewise_power(2, 3), "delta")
    assert not rep.verdict


def test_growth_mode_is_validated():
    with pytest.raises(ValueError):
        check_growth_condition(power_ctrl(2), "sideways")


def test_log_holder_constant_exponent_gives_unit_ratio():
    root = Cube.unit(2)
    cubes = [q for d in range(1, 4) for q in dyadic_cubes(root, d)]
    rep = check_log_holder(lambda Q: piecewise_power(2.5, 2.5), cubes, L_max=1.0)
    assert rep.sup_rho == pytest.approx(1.0)
    assert rep.verdict and rep.equivalent
    assert len(rep.csv_rows()) == len(cubes)
