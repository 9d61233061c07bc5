import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _models import case7_model
from twofold.charts import (
    BlowupChartModel,
    chart_field,
    gamma_invariance_check,
    phase_edge_eigenvalues,
    phase_edge_jacobian,
    slow_dynamics_check,
)
from twofold.errors import AssumptionError
from twofold.model import RegularizedContext, eval_regularized
from twofold.regularization import ARCTAN


def test_gamma_invariance(canonical, reg):
    assert gamma_invariance_check(canonical, reg) < 1e-12
    # off the line the y2 component no longer vanishes
    assert gamma_invariance_check(canonical, reg, offset=0.3) > 1e-3


def test_y2_star(canonical, reg):
    ch = BlowupChartModel("second", canonical, reg)
    # dY+/dx = 1 and dY-/dx = -1 give phi(y2*) = 1/2
    assert float(reg.phi(ch.y2_star)) == pytest.approx(0.5, abs=1e-15)
    assert ch.p0 == (0.0, ch.y2_star)


@given(x1=st.floats(-2.0, 2.0))
def test_phase_edge_eigenvalues(canonical, reg, x1):
    ch = BlowupChartModel("phase", canonical, reg)
    lo = canonical.fields(0.0)[1]
    Ym = float(lo.value(x1, 0.0)[1])
    ev = np.sort(phase_edge_eigenvalues(ch, x1))
    want = np.sort([0.0, -Ym / 2, Ym / 2])
    assert np.allclose(ev, want, atol=1e-10)


def test_phase_edge_jacobian_by_differences(canonical, reg):
    ch = BlowupChartModel("phase", canonical, reg)
    x1, h = 0.7, 1e-6
    J = phase_edge_jacobian(ch, x1)
    base = np.array([x1, 0.0, 0.0])
    for k in (1, 2):  # one-sided in r1, e1 (the chart lives on r1, e1 >= 0)
        e = np.zeros(3)
        e[k] = h
        col = (chart_field(ch, base + e) - chart_field(ch, base)) / h
        assert np.allclose(col, J[:, k], atol=1e-5)


@given(x=st.floats(-1.5, 1.5), y2=st.floats(-20.0, 20.0), r2=st.floats(0.01, 0.3), lt=st.floats(-0.5, 0.5))
def test_family_chart_matches_regularized_field(canonical, x, y2, r2, lt):
    ch = BlowupChartModel("family", canonical, ARCTAN, lambda_tilde=lt)
    F = chart_field(ch, (x, y2, r2))
    Z = eval_regularized(canonical, ARCTAN, RegularizedContext(r2, lt), (x, r2 * r2 * y2), s_max=np.inf)
    # time is multiplied by r2^2 and y2 = y / r2^2
    assert F[0] == pytest.approx(r2 * r2 * Z[0], rel=1e-12, abs=1e-14)
    assert F[1] == pytest.approx(Z[1], rel=1e-12, abs=1e-14)
    assert F[2] == 0.0


def test_chart_guards(canonical):
    with pytest.raises(ValueError):
        BlowupChartModel("polar", canonical, ARCTAN)
    with pytest.raises(ValueError):
        chart_field(BlowupChartModel("family", canonical, ARCTAN), (0.0, 0.0, -1.0))
    with pytest.raises(ValueError):
        phase_edge_jacobian(BlowupChartModel("family", canonical, ARCTAN), 0.0)


def test_critical_curve_is_layer_equilibrium(canonical, reg):
    ch = BlowupChartModel("family", canonical, reg)
    for x in (-0.8, -0.3, 0.4):
        y2 = ch.critical_curve(x)
        assert abs(chart_field(ch, (x, y2, 0.0))[1]) < 1e-14
    assert ch.normal_eigenvalue(-0.5) < 0 < ch.normal_eigenvalue(0.5)


@pytest.mark.parametrize("rng", [(-0.8, -0.2), (0.2, 0.8)])
def test_slow_drift_converges(canonical, reg, rng):
    d = [slow_dynamics_check(canonical, reg, None, rng, r2, lambda_tilde=0.25).max_deviation for r2 in (0.02, 0.01)]
    assert d[0] < 0.1
    assert 0.35 <= d[1] / d[0] <= 0.65


def test_slow_drift_exact_without_breaking(canonical):
    # with lambda_tilde = 0 the canonical slow manifold carries the sliding field exactly
    assert slow_dynamics_check(canonical, ARCTAN, None, (0.2, 0.8), 0.05).max_deviation < 1e-10


def test_slow_drift_nonlinear_model():
    m = case7_model(perturbed=True)
    d = [slow_dynamics_check(m, ARCTAN, None, (-0.8, -0.2), r2).max_deviation for r2 in (0.04, 0.02)]
    assert d[1] < d[0]


def test_slow_drift_guards(canonical):
    with pytest.raises(ValueError):
        slow_dynamics_check(canonical, ARCTAN, None, (-0.5, 0.5), 0.02)
    with pytest.raises(AssumptionError):
        slow_dynamics_check(canonical, ARCTAN, None, (0.0, 0.5), 0.02)  # fast eigenvalue vanishes at x2 = 0
