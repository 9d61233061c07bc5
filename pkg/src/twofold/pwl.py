"""Piecewise-linear two-folds in canonical form: models, lower-field portraits, corner-zero verdicts, oracles."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Optional

from .errors import ConfigError
from .model import PolynomialField, PwsModel
from .regularization import Regularization

PARAM_NAMES = ("d_minus", "t_minus", "b_plus", "a11", "a12", "a21", "a22")


@dataclass(frozen=True)
class PwlCoefficients:
    """``Z- = (-1 + d- y, -x + t- y)``, ``Z+ = (b+ + a11 x + a12 y, a21 x + a22 y)``."""

    d_minus: float
    t_minus: float
    b_plus: float
    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def from_sequence(cls, seq) -> "PwlCoefficients":
        seq = tuple(float(v) for v in seq)
        if len(seq) != 7:
            raise ConfigError("a canonical PWL system has 7 coefficients")
        return cls(*seq)

    @classmethod
    def from_mapping(cls, data) -> "PwlCoefficients":
        unknown = set(data) - set(PARAM_NAMES)
        missing = set(PARAM_NAMES) - set(data)
        if unknown or missing:
            raise ConfigError(f"pwl coefficients: unknown {sorted(unknown)}, missing {sorted(missing)}")
        return cls(*(float(data[n]) for n in PARAM_NAMES))

    def as_tuple(self) -> tuple:
        return astuple(self)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def check(self) -> None:
        if not self.a21 > 0:
            raise ConfigError(f"inadmissible coefficients: need a21 > 0 (got a21 = {self.a21})")
        if not self.b_plus > self.a21:
            raise ConfigError(f"inadmissible coefficients: need b+ > a21 (got b+ = {self.b_plus}, a21 = {self.a21})")

    @property
    def x_star(self) -> Optional[float]:
        """Zero of the sliding field, ``(a21 - b+) / a11``; ``None`` when ``a11 = 0``."""
        if self.a11 == 0:
            return None
        return (self.a21 - self.b_plus) / self.a11

    def sliding(self, x: float) -> float:
        return (self.b_plus - self.a21 + self.a11 * x) / (1.0 + self.a21)


CANONICAL = PwlCoefficients(0.0, 0.0, 2.0, 1.0, 0.0, 1.0, 0.0)


def build_pwl(coeffs: PwlCoefficients, check: bool = True, name: str = "pwl") -> PwsModel:
    """Polynomial model whose parameters are the seven coefficients (``c0 = coeffs``)."""
    if check:
        coeffs.check()
    upper = PolynomialField(
        X={"0,0": "b_plus", "1,0": "a11", "0,1": "a12"},
        Y={"1,0": "a21", "0,1": "a22"},
    )
    lower = PolynomialField(
        X={"0,0": -1.0, "0,1": "d_minus"},
        Y={"1,0": -1.0, "0,1": "t_minus"},
    )
    return PwsModel(upper, lower, PARAM_NAMES, coeffs.as_tuple(), name)


# ----------------------------------------------------------------------------
# lower-field portrait


@dataclass(frozen=True)
class LowerFieldPortrait:
    """Phase portrait of ``Z-``.

    ``kind`` is one of ``invariant_line``, ``parabolas``, ``saddle``,
    ``node``, ``monodromic``; ``subtype`` refines node/monodromic
    (``repelling``, ``attracting``, ``center``).
    """

    kind: str
    subtype: str = ""
    kappa: Optional[tuple] = None
    P: Optional[tuple] = None
    x_L: Optional[float] = None
    x_R: Optional[float] = None
    invariant_line: Optional[tuple] = None  # (slope, offset) of x = slope*y + offset

    @property
    def has_singularity(self) -> bool:
        return self.P is not None


def portrait(coeffs: PwlCoefficients) -> LowerFieldPortrait:
    d, t = coeffs.d_minus, coeffs.t_minus
    if d == 0:
        if t != 0:
            return LowerFieldPortrait("invariant_line", invariant_line=(t, 1.0 / t))
        return LowerFieldPortrait("parabolas")
    P = (t / d, 1.0 / d)
    disc = t * t - 4 * d
    if disc < 0:
        sub = "center" if t == 0 else ("repelling" if t > 0 else "attracting")
        return LowerFieldPortrait("monodromic", sub, None, P)
    r = math.sqrt(disc)
    kp, km = (t + r) / 2, (t - r) / 2
    xs = sorted((1.0 / kp, 1.0 / km))
    if d < 0:
        return LowerFieldPortrait("saddle", "", (km, kp), P, xs[0], xs[1])
    sub = "repelling" if t > 0 else "attracting"
    return LowerFieldPortrait("node", sub, (km, kp), P, xs[0], xs[1])


# ----------------------------------------------------------------------------
# corner-zero verdict for the canonical family


@dataclass(frozen=True)
class PwlCase:
    tag: str  # figure tag I..X, or "not applicable"
    statement: str = ""
    bound: Optional[int] = None
    stability: str = "unspecified"
    corner: str = ""
    reason: str = ""

    @property
    def applicable(self) -> bool:
        return self.tag != "not applicable"


def _na(reason: str) -> PwlCase:
    return PwlCase("not applicable", reason=reason)


def thm_appl_case(coeffs: PwlCoefficients, eta_minus: float, eta_plus: float, rtol: float = 1e-8) -> PwlCase:
    """Configuration of a sliding cycle whose corner is the zero ``x*`` of the sliding field.

    Boundary configurations (``x*`` equal to ``x_L``, ``x_R`` or ``1/t-``) are
    rejected because the hypotheses are strict inequalities.
    """
    xs = coeffs.x_star
    if xs is None:
        return _na("a11 = 0: the sliding field has no zero")
    if abs(xs - eta_minus) <= rtol * max(1.0, abs(xs)):
        corner = "eta-"
    elif abs(xs - eta_plus) <= rtol * max(1.0, abs(xs)):
        corner = "eta+"
    else:
        return _na(f"x* = {xs:.10g} is not at a corner; use the general engine")

    pt = portrait(coeffs)
    t = coeffs.t_minus
    tag = stmt = None
    if pt.kind == "parabolas":
        tag, stmt = "I", "1(a)"
    elif pt.kind == "invariant_line":
        if t > 0 and xs < 1.0 / t:
            tag, stmt = "II", "1(b)"
        elif t < 0 and xs > 1.0 / t:
            tag, stmt = "III", "1(c)"
        else:
            return _na(f"x* = {xs:.10g} is on the wrong side of (or on) the invariant line 1/t- = {1.0 / t:.10g}")
    elif pt.kind == "saddle":
        if pt.x_L < xs < pt.x_R:
            tag, stmt = ("IV" if corner == "eta-" else "V"), "2"
        else:
            return _na(f"saddle case needs x_L < x* < x_R strictly; got x* = {xs:.10g}, (x_L, x_R) = ({pt.x_L:.10g}, {pt.x_R:.10g})")
    elif pt.kind == "node":
        if t > 0 and xs < min(pt.x_L, pt.x_R):
            tag, stmt = "VI", "3(a)"
        elif t < 0 and xs > max(pt.x_L, pt.x_R):
            tag, stmt = "VII", "3(b)"
        else:
            return _na(f"node case conditions fail for x* = {xs:.10g}, (x_L, x_R) = ({pt.x_L:.10g}, {pt.x_R:.10g})")
    else:
        if pt.subtype == "center":
            tag = "VIII"
        else:
            tag = "IX" if corner == "eta-" else "X"
        stmt = "4"
    stability = "attracting" if coeffs.a11 > 0 else "repelling"
    return PwlCase(tag, stmt, 1, stability, corner, f"{pt.kind} lower field, x* at {corner}")


# ----------------------------------------------------------------------------
# closed forms for the parabola subfamily d- = t- = 0


@dataclass(frozen=True)
class ClosedForms:
    x: float
    half_map: float
    half_map_derivative: float
    I: float
    I_minus: float  # I-(Pi(x)) = int_{-x}^0 g
    I_plus: float  # I+(x) = int_x^0 g
    dIdx: float
    K: float


def _F(s: float, p: float, q: float) -> float:
    """``int_0^s u / (p + q u) du``, stable as ``q s / p -> 0``."""
    r = q * s / p
    if abs(r) < 1e-3:
        # r - log(1 + r) = r^2/2 - r^3/3 + ...; the closed form cancels catastrophically here
        return (s * s / p) * sum((-r) ** (k - 2) / k for k in range(2, 10))
    return (p / (q * q)) * (r - math.log1p(r))


def closed_form_oracles(coeffs: PwlCoefficients, x: float, reg: Regularization) -> ClosedForms:
    """Half map, ``I``, ``I-``, ``I+`` and ``dI/dx`` of the parabola family in closed form.

    There ``g(s) = K (1 + a21)^2 s / (p + q s)`` with ``p = b+ - a21``,
    ``q = a11`` and ``K = phi'(phi^{-1}(1 / (1 + a21)))``.
    """
    if coeffs.d_minus != 0 or coeffs.t_minus != 0:
        raise ValueError("closed forms are available only for d- = t- = 0")
    if not x > 0:
        raise ValueError("x must be positive")
    a21 = coeffs.a21
    p, q = coeffs.b_plus - a21, coeffs.a11
    if q != 0 and abs(q) * x >= p:
        raise ValueError("the sliding field vanishes on [-x, x]; I is not finite there")
    K = float(reg.phi_prime(reg.phi_inv(1.0 / (1.0 + a21))))
    A = K * (1.0 + a21) ** 2
    I_minus = -A * _F(-x, p, q)
    I_plus = -A * _F(x, p, q)
    I = 0.0 if q == 0 else A * (_F(x, p, q) - _F(-x, p, q))
    dIdx = A * x * (-2.0 * q * x) / (p * p - q * q * x * x)
    return ClosedForms(float(x), -float(x), -1.0, I, I_minus, I_plus, dIdx, K)
