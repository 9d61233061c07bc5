import math

import pytest

from _models import CASE_MODELS, case7_model, parabola_model
from twofold.cyclicity import (
    RULE_EXCLUDED,
    RULE_HYPERBOLIC,
    RULE_OPEN,
    CornerSaddleData,
    analyze_cycle,
    corner_rho,
    cyclicity_bound,
    locate_corner_saddle,
    validate_rho,
)
from twofold.errors import InsufficientData
from twofold.geometry import CaseLabel
from twofold.model import RegularizedContext
from twofold.regularization import ALGEBRAIC, ARCTAN
from twofold.sdi import Divergent, Multiplicity, SdiEvaluation


def sdi(I=-0.3, mult_I=None, dIdx=0.5, mult_d=None):
    return SdiEvaluation(1.0, -1.0, I, -0.1, 0.2, dIdx, mult_I, mult_d)


def saddle(rm=math.pi / 2, rp=3 * math.pi / 2, validated=True):
    return CornerSaddleData(rm, rp, None, validated)


# (case label, sdi, saddle) -> (kind, bound, stability)
TABLE = [
    (CaseLabel("I"), sdi(-0.3), None, ("bound", 1, "attracting")),
    (CaseLabel("I"), sdi(0.3), None, ("bound", 1, "repelling")),
    (CaseLabel("I"), sdi(0.0, Multiplicity(1)), None, ("bound", 2, "unspecified")),
    (CaseLabel("I"), sdi(0.0, Multiplicity(3)), None, ("bound", 4, "unspecified")),
    (CaseLabel("I"), sdi(0.0, Multiplicity(5, exact=False)), None, ("uncovered", None, "unspecified")),
    (CaseLabel("II"), sdi(mult_d=Multiplicity(0)), None, ("bound", 2, "unspecified")),
    (CaseLabel("II"), sdi(mult_d=Multiplicity(2)), None, ("bound", 4, "unspecified")),
    (CaseLabel("III", m_minus=1), None, None, ("bound", 1, "attracting")),
    (CaseLabel("IV", m_plus=2), None, None, ("bound", 1, "repelling")),
    (CaseLabel("V", m_minus=1), None, None, ("bound", 2, "unspecified")),
    (CaseLabel("V-mirror", m_plus=1), None, None, ("bound", 2, "unspecified")),
    (CaseLabel("VI", m_minus=1, m_plus=3), None, None, ("bound", 3, "unspecified")),
    (CaseLabel("VI", m_minus=4, m_plus=2), None, None, ("bound", 4, "unspecified")),
    (CaseLabel("VI", m_minus=2, m_plus=2), None, None, ("uncovered", None, "unspecified")),
    (CaseLabel("VII", m_minus=1, m_plus=1), None, saddle(), ("bound", 2, "unspecified")),
    (CaseLabel("VII", m_minus=1, m_plus=1), None, saddle(1.0, 1.0), ("uncovered", None, "unspecified")),
    (CaseLabel("VII", m_minus=1, m_plus=1), None, saddle(validated=False), ("uncovered", None, "unspecified")),
    (CaseLabel("VIII", m_minus=1, m_plus=1), None, saddle(), ("bound", 3, "unspecified")),
    (CaseLabel("VIII", m_minus=1, m_plus=1), None, saddle(2.0, 2.0), ("uncovered", None, "unspecified")),
    (CaseLabel("excluded"), None, None, ("no limit cycles", 0, "unspecified")),
    (CaseLabel("uncovered", "corner multiplicity beyond the tested order"), None, None, ("uncovered", None, "unspecified")),
]


@pytest.mark.parametrize("case,ev,sad,want", TABLE, ids=[f"{r[0].tag}-{i}" for i, r in enumerate(TABLE)])
def test_verdict_table(case, ev, sad, want):
    v = cyclicity_bound(case, ev, sad)
    assert (v.kind, v.bound, v.stability) == want
    if v.kind == "uncovered":
        assert v.theorem == RULE_OPEN and v.explanation
    assert v.describe()


@pytest.mark.parametrize(
    "case,ev,sad",
    [
        (CaseLabel("I"), None, None),
        (CaseLabel("I"), sdi(Divergent(-1, (0.5,))), None),
        (CaseLabel("I"), sdi(0.0, None), None),
        (CaseLabel("I"), sdi(0.0, Multiplicity(0)), None),
        (CaseLabel("II"), sdi(mult_d=None), None),
        (CaseLabel("VI", m_minus=1), None, None),
        (CaseLabel("VII", m_minus=1, m_plus=1), None, None),
    ],
)
def test_missing_inputs(case, ev, sad):
    with pytest.raises(InsufficientData):
        cyclicity_bound(case, ev, sad)


def test_unknown_tag():
    with pytest.raises(ValueError):
        cyclicity_bound(CaseLabel("XII"))


def test_excluded_rule_tag():
    assert cyclicity_bound(CaseLabel("excluded", "odd zero")).theorem == RULE_EXCLUDED


@pytest.mark.parametrize(
    "tag,kind,bound",
    [
        ("I", "bound", 1),
        ("II", "bound", 2),
        ("III", "bound", 1),
        ("IV", "bound", 1),
        ("V", "bound", 2),
        ("V-mirror", "bound", 2),
        ("VI", "bound", 3),
        ("VII", "uncovered", None),  # the parabola version has rho- = rho+
        ("VIII", "bound", 3),
        ("excluded", "no limit cycles", 0),
    ],
)
def test_pipeline_on_case_models(tag, kind, bound):
    _, case, _, _, v = analyze_cycle(parabola_model(CASE_MODELS[tag], tag), ARCTAN, None, 1.0)
    assert case.tag == tag
    assert (v.kind, v.bound) == (kind, bound)


@pytest.mark.parametrize("reg,scale", [(ARCTAN, math.pi), (ALGEBRAIC, 2.0)])
def test_case7_rho(case7, reg, scale):
    # X_sl' = -1 at -1 and -3 at +1, |Y+ - Y-| = 2, and phi'(phi^{-1}(1/2)) = 1/scale
    assert corner_rho(case7, reg, None, -1.0) == pytest.approx(scale / 2, rel=1e-10)
    assert corner_rho(case7, reg, None, 1.0) == pytest.approx(3 * scale / 2, rel=1e-10)


def test_case7_pipeline(case7):
    _, case, _, sad, v = analyze_cycle(case7, ARCTAN, None, 1.0)
    assert case.tag == "VII" and sad.validated
    assert (v.kind, v.bound, v.theorem) == ("bound", 2, RULE_HYPERBOLIC)


def test_corner_rho_guards(case7):
    with pytest.raises(ValueError):
        corner_rho(case7, ARCTAN, None, 0.5)  # not a zero
    with pytest.raises(ValueError):
        corner_rho(parabola_model(CASE_MODELS["VI"]), ARCTAN, None, 1.0)  # double zero


def test_saddle_location(case7):
    sp = locate_corner_saddle(case7, ARCTAN, RegularizedContext(0.05), -1.0)
    assert sp.is_saddle
    assert sp.point[0] == pytest.approx(-1.0, abs=1e-8)


def test_validate_rho_perturbed():
    m = case7_model(perturbed=True)
    x0 = -1.0
    res = validate_rho(m, ARCTAN, None, x0, eps_grid=(0.1, 0.05, 0.025))
    assert res.validated, res.reason
    assert res.rel_errors[0] > res.rel_errors[1] > res.rel_errors[2]
