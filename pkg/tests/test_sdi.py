import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _models import parabola_model
from twofold.errors import PoleError, SlidingRegionViolation
from twofold.model import RegularizedContext
from twofold.pwl import CANONICAL, PwlCoefficients, build_pwl, closed_form_oracles
from twofold.regularization import ARCTAN
from twofold.sdi import (
    Divergent,
    Integrand,
    I_tilde_minus,
    critical_y2,
    is_finite,
    sdi_curve,
    sdi_dIdx,
    sdi_evaluate,
    sdi_I,
    zero_multiplicity,
)


@st.composite
def parabola_coeffs(draw):
    a21 = draw(st.floats(0.2, 3.0))
    b = a21 + draw(st.floats(0.2, 3.0))
    a11 = draw(st.floats(-0.9, 0.9)) * (b - a21)  # |a11| < b+ - a21 keeps [-1, 1] zero-free
    return PwlCoefficients(0.0, 0.0, b, a11, 0.0, a21, 0.0)


@given(co=parabola_coeffs(), x=st.floats(0.1, 0.95))
def test_closed_form_matches_quadrature(reg, co, x):
    ev = sdi_I(build_pwl(co), reg, None, x)
    cf = closed_form_oracles(co, x, reg)
    assert ev.pi_x == pytest.approx(cf.half_map, abs=1e-9)
    assert ev.I_value == pytest.approx(cf.I, abs=1e-8)
    assert ev.I_minus == pytest.approx(cf.I_minus, abs=1e-8)
    assert ev.I_plus == pytest.approx(cf.I_plus, abs=1e-8)
    assert ev.I_value == pytest.approx(ev.I_minus - ev.I_plus, abs=1e-8)


@given(x=st.floats(0.05, 2.0), b=st.floats(1.5, 4.0))
def test_symmetric_case_vanishes(reg, x, b):
    co = PwlCoefficients(0.0, 0.0, b, 0.0, 0.0, 1.0, 0.0)
    assert abs(sdi_I(build_pwl(co), reg, None, x).I_value) < 1e-10


def test_integrand_sign_and_removable_point(canonical, reg):
    g = Integrand(canonical, reg)
    assert g(0.0) == 0.0
    assert g(-0.5) < 0 < g(0.5)
    with pytest.raises(PoleError):
        g(-1.0)  # sliding zero of the canonical model


def test_integrand_outside_sliding_set(reg):
    # Y+ = x (1 - 2x) turns negative for x > 1/2 where Y- = -x < 0 as well: crossing
    m = parabola_model({"0,0": 2.0})
    m = type(m)(type(m.upper)(m.upper.X, {"1,0": 1.0, "2,0": -2.0}), m.lower)
    g = Integrand(m, reg)
    assert np.isfinite(g(0.3))
    with pytest.raises(SlidingRegionViolation):
        g(0.8)


def test_corner_zero_is_divergent(canonical, reg):
    ev = sdi_I(canonical, reg, None, 1.0)
    assert isinstance(ev.I_value, Divergent) and isinstance(ev.I_minus, Divergent)
    assert ev.I_minus.sign == -1
    assert ev.I_value.sign == -1
    assert ev.I_minus.zeros == pytest.approx((-1.0,))
    assert is_finite(ev.I_plus)
    assert not ev.finite and ev.I_sign == -1
    assert math.isinf(float(ev.I_value))


def test_zero_on_both_sides_is_indeterminate(case7, reg):
    ev = sdi_I(case7, reg, None, 1.0)
    assert isinstance(ev.I_value, Divergent) and ev.I_value.sign == 0
    assert math.isnan(float(ev.I_value))
    assert ev.I_sign is None


@pytest.mark.parametrize("x", np.linspace(0.05, 0.95, 20))
def test_dIdx_matches_finite_differences(canonical, x):
    h = 1e-4
    f = lambda v: sdi_I(canonical, ARCTAN, None, v).I_value
    fd = (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)
    assert sdi_dIdx(canonical, ARCTAN, None, x) == pytest.approx(fd, rel=1e-6)


@given(x=st.floats(0.05, 0.95))
def test_dIdx_closed_form_canonical(reg, x):
    K = float(reg.phi_prime(reg.phi_inv(0.5)))
    want = -8 * K * x * x / (1 - x * x)
    assert sdi_dIdx(build_pwl(CANONICAL), reg, None, x) == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_dIdx_rejects_corner_zero(canonical):
    with pytest.raises(PoleError):
        sdi_dIdx(canonical, ARCTAN, None, 1.0)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_zero_multiplicity_of_powers(m):
    mult = zero_multiplicity(lambda v: (v - 0.3) ** m * (1 + v), 0.3, m_max=5, h0=0.05)
    assert mult.exact and mult.m == m


def test_zero_multiplicity_beyond_order():
    mult = zero_multiplicity(lambda v: (v - 0.3) ** 6, 0.3, m_max=3, h0=0.05)
    assert not mult.exact and mult.label == ">=3"


def test_evaluate_symmetric_multiplicities():
    # a11 = 0: I vanishes identically, dI/dx vanishes too; both are flagged as high-order zeros
    m = build_pwl(PwlCoefficients(0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0))
    ev = sdi_evaluate(m, ARCTAN, None, 0.5)
    assert ev.finite and abs(ev.I_value) < 1e-10
    assert ev.mult_I_at_eta_plus is not None and not ev.mult_I_at_eta_plus.exact
    assert not ev.mult_dIdx_at_eta_plus.exact


def test_evaluate_regular():
    m = build_pwl(PwlCoefficients(0.0, 0.0, 2.0, 0.5, 0.0, 1.0, 0.0))
    ev = sdi_evaluate(m, ARCTAN, None, 1.0)
    assert ev.I_sign == -1
    assert ev.mult_I_at_eta_plus is None
    assert ev.mult_dIdx_at_eta_plus.m == 0


def test_curve_rows(canonical):
    rows = sdi_curve(canonical, ARCTAN, None, [0.3, 0.6, 1.0])
    assert rows.shape == (3, 4)
    assert rows[-1, 3] == 1.0 and np.isnan(rows[-1, 1])
    assert np.all(rows[:2, 3] == 0.0)


def test_critical_y2(canonical, reg):
    y2 = critical_y2(canonical, reg, None, -0.5)
    assert float(reg.phi(y2)) == pytest.approx(0.5, abs=1e-14)


def test_orbit_integral_regular_side_converges():
    m = build_pwl(PwlCoefficients(0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0))
    exact = sdi_I(m, ARCTAN, None, 0.5).I_minus
    errs = [abs(I_tilde_minus(m, ARCTAN, RegularizedContext(e), -0.5, None).I_tilde - exact) for e in (0.1, 0.05)]
    assert errs[1] < errs[0] < 0.5


def test_orbit_integral_charts_agree(canonical):
    ctx = RegularizedContext(0.1)
    a = I_tilde_minus(canonical, ARCTAN, ctx, -0.5, chart="family").I_tilde
    b = I_tilde_minus(canonical, ARCTAN, ctx, -0.5, chart="original").I_tilde
    assert a == pytest.approx(b, rel=1e-6)
