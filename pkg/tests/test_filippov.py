import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from _models import CASE_MODELS, parabola_model
from twofold.errors import SwitchingDegeneracy, ZeroClusterError
from twofold.filippov import (
    SwitchingLine,
    certify_two_fold,
    classify_switch_point,
    det_Z,
    find_sliding_zeros,
    nu,
    sliding_vf,
)
from twofold.model import PolynomialField, PwsModel
from twofold.pwl import PwlCoefficients, build_pwl


@pytest.mark.parametrize(
    "x, tag",
    [(-1.0, "stable-sliding"), (-0.3, "stable-sliding"), (0.5, "unstable-sliding"), (2.0, "unstable-sliding")],
)
def test_canonical_partition(canonical, x, tag):
    assert classify_switch_point(canonical, None, x).tag == tag


def test_canonical_two_fold_visibility(canonical):
    cls = classify_switch_point(canonical, None, 0.0)
    assert (cls.tag, cls.side, cls.visibility) == ("tangency", "both", "visible/invisible")


def test_crossing_point():
    m = PwsModel(PolynomialField({"0,0": 1}, {"0,0": 1}), PolynomialField({"0,0": 1}, {"0,0": 2}))
    assert classify_switch_point(m, None, 0.3).tag == "crossing"


@given(x=st.floats(-3, 3))
def test_canonical_sliding_field_closed_form(canonical, x):
    assert float(det_Z(canonical, None, x)) == pytest.approx(x * (1 + x), abs=1e-12)
    if abs(x) > 1e-6:
        assert sliding_vf(canonical, None, x) == pytest.approx((1 + x) / 2, abs=1e-12)


def test_nu_canonical(canonical):
    assert nu(canonical) == pytest.approx(0.5)
    assert sliding_vf(canonical, None, 0.0) == pytest.approx(0.5)


@given(
    b=st.floats(-2, 4), a21=st.floats(-2, 4), a11=st.floats(-3, 3), d=st.floats(-2, 2), t=st.floats(-2, 2)
)
def test_certificate_iff_admissible(b, a21, a11, d, t):
    assume(abs(b - a21) > 1e-6 and abs(a21) > 1e-6)
    m = build_pwl(PwlCoefficients(d, t, b, a11, 0.3, a21, -0.4), check=False)
    cert = certify_two_fold(m)
    assert cert.passes == (b > a21 > 0)
    if cert.passes:
        assert cert.nu == pytest.approx((b - a21) / (1 + a21))


def test_certificate_names_failures():
    cert = certify_two_fold(build_pwl(PwlCoefficients(0, 0, 0.5, 1, 0, 1, 0), check=False))
    assert not cert.passes and "nu(c) > 0" in cert.failed


def test_switching_degeneracy():
    m = PwsModel(PolynomialField({"0,0": 2}, {"1,0": 1}), PolynomialField({"0,0": -1}, {"1,0": -1, "2,0": 2}))
    with pytest.raises(SwitchingDegeneracy):
        SwitchingLine(m).sliding(1.0)


@pytest.mark.parametrize("key, x0, m", [("III", -1.0, 1), ("II", -0.5, 2), ("excluded", -0.5, 3)])
def test_zero_multiplicities(key, x0, m):
    zs = find_sliding_zeros(parabola_model(CASE_MODELS[key]), None, (-2.0, -0.05))
    near = [z for z in zs if abs(z.x0 - x0) < 1e-6]
    assert len(near) == 1 and near[0].multiplicity == m and near[0].exact
    assert near[0].parity == ("even" if m % 2 == 0 else "odd")


def test_multiplicity_beyond_m_max_is_a_lower_bound():
    # X+ - 1 = (x + 1/2)^5: multiplicity 5 > m_max = 4
    c = [1 + 0.5**5, 5 * 0.5**4, 10 * 0.5**3, 10 * 0.5**2, 5 * 0.5, 1.0]
    m = parabola_model({f"{k},0": v for k, v in enumerate(c)})
    zs = find_sliding_zeros(m, None, (-2.0, -0.05))
    assert len(zs) == 1 and not zs[0].exact and zs[0].label == ">=4" and zs[0].parity == "unknown"


def _pair(gap):
    a, b = -0.5, -0.5 - gap
    return parabola_model({"0,0": 1 + a * b, "1,0": -(a + b), "2,0": 1.0})


def test_zeros_inside_cluster_radius_merge():
    zs = find_sliding_zeros(_pair(1e-7), None, (-2.0, -0.05))
    assert len(zs) == 1 and zs[0].multiplicity == 2


def test_zero_cluster_at_the_radius_is_reported():
    with pytest.raises(ZeroClusterError):
        find_sliding_zeros(_pair(2e-5), None, (-2.0, -0.05))


def test_search_interval_must_avoid_two_fold(canonical):
    with pytest.raises(ValueError):
        find_sliding_zeros(canonical, None, (-1.0, 1.0))


@given(x=st.floats(0.05, 3))
def test_sliding_derivative_matches_differences(x):
    line = SwitchingLine(parabola_model(CASE_MODELS["VI"]))
    h = 1e-6
    fd = (line.sliding(x + h) - line.sliding(x - h)) / (2 * h)
    assert line.sliding_derivative(x) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_vectorized_line_values(canonical):
    line = SwitchingLine(canonical)
    xs = np.linspace(-1, 1, 5)
    assert np.allclose(line.det(xs), xs * (1 + xs))
