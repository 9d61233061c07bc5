"""Cyclicity verdicts from the case label, slow divergence data and corner saddle ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData, NumericalError, PoleError
from .filippov import SwitchingLine
from .geometry import CaseLabel
from .model import PwsModel, RegularizedContext, regularized_field
from .regularization import Regularization
from .sdi import Divergent, SdiEvaluation, critical_y2
from .tolerances import DEFAULT, Tolerances

# rule tags attached to each verdict
RULE_REGULAR = "regular-sliding:sdi-sign"
RULE_REGULAR_MULT = "regular-sliding:sdi-zero-multiplicity"
RULE_INTERIOR = "interior-zeros:derivative-multiplicity"
RULE_CORNER_MINUS = "corner-zero:stable-corner"
RULE_CORNER_PLUS = "corner-zero:unstable-corner"
RULE_CORNER_MIXED = "corner-zero:with-interior-zeros"
RULE_UNEQUAL_M = "two-corner-zeros:unequal-multiplicity"
RULE_HYPERBOLIC = "two-corner-zeros:hyperbolic"
RULE_HYPERBOLIC_INTERIOR = "two-corner-zeros:hyperbolic-with-interior-zeros"
RULE_EXCLUDED = "odd-interior-zero:exclusion"
RULE_OPEN = "open-case"


# ----------------------------------------------------------------------------
# corner saddle ratios


def corner_rho(model: PwsModel, reg: Regularization, c, x0: float, tol: Tolerances = DEFAULT) -> float:
    """``|X_sl'(x0)| / |(Y+ - Y-)(x0, 0) phi'(y_C(x0))|`` at a simple zero ``x0`` of the sliding field.

    This is the ratio of the slow eigenvalue to the fast eigenvalue of the
    layer-plus-slow linearization; it is validated against the Jacobian of
    the regularized field by :func:`validate_rho`.
    """
    line = SwitchingLine(model, c)
    slope = line.sliding_derivative(float(x0), 1)
    scale = max(1.0, abs(line.sliding(x0 + 0.1 if x0 < 0 else x0 - 0.1)))
    if abs(line.sliding(x0)) > tol.tau_mult * scale:
        raise ValueError(f"x0 = {x0!r} is not a zero of the sliding field")
    if abs(slope) <= tol.tau_mult * scale:
        raise ValueError(f"rho undefined: x0 = {x0!r} is not a simple zero")
    fast = float(line.dY(x0)) * float(reg.phi_prime(critical_y2(model, reg, c, x0)))
    return abs(slope) / abs(fast)


@dataclass(frozen=True)
class SaddlePoint:
    eps: float
    point: tuple
    eigenvalues: tuple
    ratio: float  # small eigenvalue / large eigenvalue (negative at a saddle)

    @property
    def is_saddle(self) -> bool:
        a, b = self.eigenvalues
        return a * b < 0

    @property
    def rho_measured(self) -> float:
        return -self.ratio / self.eps**2


def locate_corner_saddle(
    model: PwsModel, reg: Regularization, ctx: RegularizedContext, x0: float, maxiter: int = 50
) -> SaddlePoint:
    """Equilibrium of the regularized field near ``(x0, eps^2 y_C(x0))`` by Newton's method.

    The iteration runs in ``(x, y / eps^2)`` so both unknowns are O(1).
    """
    e2 = ctx.eps**2
    fld = regularized_field(model, reg, ctx, s_max=math.inf)
    u = np.array([float(x0), critical_y2(model, reg, ctx.c, x0)])
    for _ in range(maxiter):
        F = fld.value(u[0], e2 * u[1])
        J, _ = fld.jacobian(u[0], e2 * u[1])
        G = np.array([[J[0, 0], e2 * J[0, 1]], [J[1, 0], e2 * J[1, 1]]])
        step = np.linalg.solve(G, -F)
        u = u + step
        if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(u))):
            break
    else:
        raise NumericalError(f"saddle search near x = {x0!r} did not converge at eps = {ctx.eps}")
    J, _ = fld.jacobian(u[0], e2 * u[1])
    ev = np.linalg.eigvals(J)
    if np.any(np.abs(ev.imag) > 0):
        raise NumericalError(f"equilibrium near x = {x0!r} has complex eigenvalues {ev}")
    ev = sorted(ev.real, key=abs)
    return SaddlePoint(ctx.eps, (float(u[0]), float(e2 * u[1])), (float(ev[0]), float(ev[1])), float(ev[0] / ev[1]))


@dataclass(frozen=True)
class RhoValidation:
    rho: float
    saddles: tuple  # SaddlePoint per eps
    rel_errors: tuple
    validated: bool
    reason: str = ""


def validate_rho(
    model: PwsModel,
    reg: Regularization,
    c,
    x0: float,
    eps_grid: Sequence[float] = (0.1, 0.05, 0.025),
    rtol: float = 0.1,
    lambda_tilde: float = 0.0,
) -> RhoValidation:
    """Compare ``rho`` with ``-ratio / eps^2`` measured at the regularized saddle.

    Passes when every measurement at ``eps <= 0.05`` is within ``rtol`` and
    the error decreases along the (decreasing) ``eps`` grid or sits at
    roundoff level.
    """
    cc = model.resolve_c(c)
    rho = corner_rho(model, reg, cc, x0)
    saddles, errs = [], []
    for eps in eps_grid:
        sp = locate_corner_saddle(model, reg, RegularizedContext(eps, lambda_tilde, cc), x0)
        saddles.append(sp)
        errs.append(abs(sp.rho_measured - rho) / rho)
    reasons = []
    if not all(sp.is_saddle for sp in saddles):
        reasons.append("equilibrium is not a saddle")
    if any(e > rtol for sp, e in zip(saddles, errs) if sp.eps <= 0.05):
        reasons.append(f"relative error above {rtol}")
    order = np.argsort([-sp.eps for sp in saddles])
    seq = [errs[i] for i in order]
    # errors at roundoff level (e.g. an exactly invariant switching line) count as converged
    if any(b >= a and b > 1e-10 for a, b in zip(seq, seq[1:])):
        reasons.append("error does not decrease with eps")
    return RhoValidation(rho, tuple(saddles), tuple(errs), not reasons, "; ".join(reasons))


@dataclass(frozen=True)
class CornerSaddleData:
    rho_minus: float
    rho_plus: float
    validated_ratio: Optional[dict] = None  # eps -> (measured rho-, measured rho+)
    validated: Optional[bool] = None  # None: not attempted


def corner_saddle_data(
    model: PwsModel, reg: Regularization, c, eta_minus: float, eta_plus: float, validate: bool = True, **kw
) -> CornerSaddleData:
    if not validate:
        return CornerSaddleData(corner_rho(model, reg, c, eta_minus), corner_rho(model, reg, c, eta_plus))
    vm = validate_rho(model, reg, c, eta_minus, **kw)
    vp = validate_rho(model, reg, c, eta_plus, **kw)
    ratios = {sm.eps: (sm.rho_measured, sp.rho_measured) for sm, sp in zip(vm.saddles, vp.saddles)}
    return CornerSaddleData(vm.rho, vp.rho, ratios, vm.validated and vp.validated)


# ----------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class CyclicityVerdict:
    """Upper bound on the number of limit cycles near the sliding cycle.

    ``kind`` is ``bound``, ``no limit cycles`` or ``uncovered``; ``bound``
    holds N for the first and 0 for the second.
    """

    kind: str
    bound: Optional[int]
    stability: str
    theorem: str
    inputs_used: dict = field(default_factory=dict)
    explanation: str = ""

    def describe(self) -> str:
        if self.kind == "bound":
            return f"at most {self.bound} limit cycle(s), {self.stability} [{self.theorem}]"
        if self.kind == "no limit cycles":
            return f"no limit cycles [{self.theorem}]"
        return f"uncovered: {self.explanation}"


def _bound(n: int, rule: str, inputs: dict, stability: str = "unspecified", why: str = "") -> CyclicityVerdict:
    return CyclicityVerdict("bound", int(n), stability, rule, inputs, why)


def _uncovered(why: str, inputs: dict) -> CyclicityVerdict:
    return CyclicityVerdict("uncovered", None, "unspecified", RULE_OPEN, inputs, why)


def cyclicity_bound(
    case: CaseLabel,
    sdi: Optional[SdiEvaluation] = None,
    saddle: Optional[CornerSaddleData] = None,
    tol: Tolerances = DEFAULT,
) -> CyclicityVerdict:
    """Dispatch the case label onto the matching bound; raise :class:`InsufficientData` for missing inputs."""
    tag = case.tag
    inputs: dict = {"case": tag}
    if case.m_minus is not None:
        inputs["m_minus"] = case.m_minus
    if case.m_plus is not None:
        inputs["m_plus"] = case.m_plus

    if tag == "excluded":
        return CyclicityVerdict("no limit cycles", 0, "unspecified", RULE_EXCLUDED, inputs, case.reason)
    if tag == "uncovered":
        return _uncovered(case.reason or "configuration outside the covered cases", inputs)

    if tag == "I":
        if sdi is None or sdi.I_value is None:
            raise InsufficientData(["I(eta+) (slow divergence integral at the corner)"])
        if isinstance(sdi.I_value, Divergent):
            raise InsufficientData(["finite I(eta+); the path meets a sliding zero, so the case label is inconsistent"])
        inputs["I"] = float(sdi.I_value)
        if abs(sdi.I_value) > tol.tau_mult:
            inputs["I_sign"] = int(np.sign(sdi.I_value))
            stab = "attracting" if sdi.I_value < 0 else "repelling"
            return _bound(1, RULE_REGULAR, inputs, stab)
        mult = sdi.mult_I_at_eta_plus
        if mult is None:
            raise InsufficientData(["multiplicity of the zero of I at eta+"])
        inputs["m"] = mult.label
        if not mult.exact:
            return _uncovered(f"I vanishes at eta+ to every tested order (m {mult.label})", inputs)
        if mult.m == 0:
            raise InsufficientData(["consistent I(eta+): |I| <= tau but its multiplicity test reports no zero"])
        return _bound(mult.m + 1, RULE_REGULAR_MULT, inputs)

    if tag == "II":
        mult = sdi.mult_dIdx_at_eta_plus if sdi is not None else None
        if mult is None:
            raise InsufficientData(["multiplicity of the zero of dI/dx at eta+ (0 if dI/dx(eta+) != 0)"])
        inputs["m"] = mult.label
        if sdi.dIdx_value is not None:
            inputs["dIdx"] = float(sdi.dIdx_value)
        if not mult.exact:
            return _uncovered(f"dI/dx vanishes at eta+ to every tested order (m {mult.label})", inputs)
        return _bound(2 + mult.m, RULE_INTERIOR, inputs)

    if tag == "III":
        return _bound(1, RULE_CORNER_MINUS, inputs, "attracting")
    if tag == "IV":
        return _bound(1, RULE_CORNER_PLUS, inputs, "repelling")
    if tag in ("V", "V-mirror"):
        return _bound(2, RULE_CORNER_MIXED, inputs)

    if tag == "VI":
        if case.m_minus is None or case.m_plus is None:
            raise InsufficientData(["corner multiplicities m- and m+"])
        if case.m_minus == case.m_plus:
            return _uncovered("equal corner multiplicities m- = m+", inputs)
        return _bound(2 + min(case.m_minus, case.m_plus), RULE_UNEQUAL_M, inputs)

    if tag in ("VII", "VIII"):
        if saddle is None:
            raise InsufficientData(["corner saddle ratios rho- and rho+"])
        inputs["rho_minus"] = float(saddle.rho_minus)
        inputs["rho_plus"] = float(saddle.rho_plus)
        rm, rp = saddle.rho_minus, saddle.rho_plus
        if abs(rm - rp) <= tol.rho_margin * max(abs(rm), abs(rp)):
            return _uncovered("rho- = rho+ within the relative margin", inputs)
        if saddle.validated is False:
            return _uncovered("rho unvalidated: measured saddle ratios disagree with the formula", inputs)
        if tag == "VII":
            return _bound(2, RULE_HYPERBOLIC, inputs)
        return _bound(3, RULE_HYPERBOLIC_INTERIOR, inputs)

    raise ValueError(f"unknown case tag {tag!r}")


def analyze_cycle(
    model: PwsModel,
    reg: Regularization,
    c,
    eta_plus: float,
    tol: Tolerances = DEFAULT,
    validate_saddles: bool = True,
):
    """Cycle, case label, SDI data, saddle data and verdict in one call."""
    from .geometry import build_cycle, classify_case
    from .sdi import sdi_evaluate

    cycle = build_cycle(model, c, eta_plus, tol)
    case = classify_case(cycle)
    sdi = saddle = None
    if case.tag in ("I", "II"):
        sdi = sdi_evaluate(model, reg, cycle.c, eta_plus, tol)
    elif case.tag not in ("excluded", "uncovered"):
        try:
            sdi = sdi_evaluate(model, reg, cycle.c, eta_plus, tol, multiplicities=False)
        except PoleError:
            sdi = None
    if case.tag in ("VII", "VIII"):
        saddle = corner_saddle_data(model, reg, cycle.c, cycle.eta_minus, cycle.eta_plus, validate_saddles)
    verdict = cyclicity_bound(case, sdi, saddle, tol)
    return cycle, case, sdi, saddle, verdict
