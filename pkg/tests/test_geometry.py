import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _models import CASE_MODELS, case7_model, parabola_model
from twofold.errors import CycleAssumptionError
from twofold.geometry import build_cycle, classify_case, half_map
from twofold.model import PolynomialField, PwsModel


@given(x=st.floats(0.05, 3.0))
def test_parabola_half_map_is_reflection(canonical, x):
    hm = half_map(canonical, None, x)
    assert hm.x_out == pytest.approx(-x, abs=1e-9)
    assert hm.derivative == pytest.approx(-1.0, abs=1e-7)
    assert hm.derivative_liouville == pytest.approx(-1.0, abs=1e-7)
    assert hm.certified
    assert hm.transit_time == pytest.approx(2 * x, rel=1e-8)  # x' = -1


def test_half_map_orbit_lies_on_parabola(canonical):
    hm = half_map(canonical, None, 1.0)
    t, x, y = hm.orbit.T
    assert np.max(np.abs(y - (x**2 - 1) / 2)) < 1e-8
    assert hm.s0_candidate == pytest.approx(-0.5, abs=1e-8)


@given(
    a=st.floats(-0.8, 0.8),
    b=st.floats(-0.5, 0.5),
    x=st.floats(0.2, 1.5),
)
def test_half_map_derivative_routes_agree(a, b, x):
    # a linear focus/node lower field (a y - 1 + b x, -x + b y); both derivative routes must agree
    lower = PolynomialField({"0,0": -1.0, "1,0": b, "0,1": a}, {"1,0": -1.0, "0,1": b})
    m = PwsModel(PolynomialField({"0,0": 2.0}, {"1,0": 1.0}), lower)
    try:
        hm = half_map(m, None, x)
    except CycleAssumptionError:
        return
    assert hm.derivative == pytest.approx(hm.derivative_liouville, rel=1e-6)


def test_half_map_rejects_bad_start(canonical):
    with pytest.raises(ValueError):
        half_map(canonical, None, -0.5)
    with pytest.raises(CycleAssumptionError):
        # lower field pointing up at (x, 0)
        half_map(PwsModel(PolynomialField({"0,0": 1.0}, {"1,0": 1.0}), PolynomialField({"0,0": -1.0}, {"0,0": 1.0})), None, 1.0)


def test_canonical_cycle(canonical):
    cyc = build_cycle(canonical, None, 1.0)
    assert cyc.eta_minus == pytest.approx(-1.0, abs=1e-9)
    assert cyc.s0 == pytest.approx(-0.5, abs=1e-8)
    assert cyc.corner_minus is not None and cyc.corner_minus.multiplicity == 1
    assert cyc.corner_plus is None and not cyc.interior
    assert classify_case(cyc).tag == "III"


@pytest.mark.parametrize("tag", sorted(CASE_MODELS))
def test_classification(tag):
    cyc = build_cycle(parabola_model(CASE_MODELS[tag], tag), None, 1.0)
    assert classify_case(cyc).tag == tag


def test_case7_and_its_perturbation(case7):
    lab = classify_case(build_cycle(case7, None, 1.0))
    assert (lab.tag, lab.m_minus, lab.m_plus) == ("VII", 1, 1)
    # the y-dependent perturbation moves eta- away from the corner zero at -1
    cyc = build_cycle(case7_model(perturbed=True), None, 1.0)
    assert classify_case(cyc).tag != "VII"


def test_sliding_interval_violation():
    # Y+ = x (1 - 2x) turns negative at x = 1/2, so (1/2, 1] is crossing, not sliding
    m = PwsModel(PolynomialField({"0,0": 2.0}, {"1,0": 1.0, "2,0": -2.0}), PolynomialField({"0,0": -1.0}, {"1,0": -1.0}))
    with pytest.raises(CycleAssumptionError):
        build_cycle(m, None, 1.0)


def test_cycle_with_smaller_eta(canonical):
    cyc = build_cycle(canonical, None, 0.4)
    assert cyc.eta_minus == pytest.approx(-0.4, abs=1e-9)
    assert classify_case(cyc).tag == "I"
