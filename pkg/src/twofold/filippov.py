"""Filippov layer: switching-line classification, sliding field, two-fold certificate, sliding zeros."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from ._numerics import newton_polish, richardson_derivative
from .errors import IndeterminateCorner, SwitchingDegeneracy, ZeroClusterError
from .model import PwsModel
from .tolerances import DEFAULT, Tolerances


class SwitchingLine:
    """Restriction of both fields to ``y = 0`` at a fixed parameter point.

    Polynomial models get exact coefficient arrays for every quantity, so
    derivatives of ``det Z`` of any order are exact.  Callback models fall
    back on Richardson-extrapolated finite differences.
    """

    def __init__(self, model: PwsModel, c=None, lam: float = 0.0):
        self.model = model
        self.c = model.resolve_c(c)
        self.upper, self.lower = model.fields(lam, self.c)
        self.exact = bool(self.upper.is_polynomial and self.lower.is_polynomial)
        if self.exact:
            self.Xp = self.upper.line_poly(0)
            self.Yp = self.upper.line_poly(1)
            self.Xm = self.lower.line_poly(0)
            self.Ym = self.lower.line_poly(1)
            self.det_poly = P.polysub(P.polymul(self.Xm, self.Yp), P.polymul(self.Xp, self.Ym))
            self.dY_poly = P.polysub(self.Yp, self.Ym)

    # component values on the line ---------------------------------------------

    def values(self, x):
        """``(X+, Y+, X-, Y-)`` at ``(x, 0)``; vectorized for polynomial models."""
        if self.exact:
            return (P.polyval(x, self.Xp), P.polyval(x, self.Yp), P.polyval(x, self.Xm), P.polyval(x, self.Ym))
        if np.ndim(x):
            rows = [self.values(float(v)) for v in np.ravel(x)]
            return tuple(np.array(col).reshape(np.shape(x)) for col in zip(*rows))
        Xp, Yp = self.upper.value(float(x), 0.0)
        Xm, Ym = self.lower.value(float(x), 0.0)
        return float(Xp), float(Yp), float(Xm), float(Ym)

    def det(self, x):
        if self.exact:
            return P.polyval(x, self.det_poly)
        Xp, Yp, Xm, Ym = self.values(x)
        return Xm * Yp - Xp * Ym

    def dY(self, x):
        """``(Y+ - Y-)(x, 0)``."""
        if self.exact:
            return P.polyval(x, self.dY_poly)
        _, Yp, _, Ym = self.values(x)
        return Yp - Ym

    def det_derivative(self, x: float, k: int) -> float:
        if self.exact:
            return float(P.polyval(x, P.polyder(self.det_poly, k))) if k else float(self.det(x))
        return richardson_derivative(self.det, x, k).value

    def dY_derivative(self, x: float, k: int) -> float:
        if self.exact:
            return float(P.polyval(x, P.polyder(self.dY_poly, k))) if k else float(self.dY(x))
        return richardson_derivative(self.dY, x, k).value

    def dxY(self, x: float) -> tuple[float, float]:
        """``(d/dx Y+, d/dx Y-)`` at ``(x, 0)``."""
        Jp = self.upper.jacobian(x, 0.0)
        Jm = self.lower.jacobian(x, 0.0)
        return float(Jp[1, 0]), float(Jm[1, 0])

    # sliding field --------------------------------------------------------------

    def nu(self) -> float:
        """Value at the two-fold of the continuous extension of the sliding field."""
        return self.det_derivative(0.0, 1) / self.dY_derivative(0.0, 1)

    def sliding(self, x: float, tol: Tolerances = DEFAULT) -> float:
        x = float(x)
        if abs(x) <= 1e-9:
            return self.nu()
        dy = float(self.dY(x))
        if abs(dy) <= tol.tau_sw:
            raise SwitchingDegeneracy(f"switching degeneracy: Y+ - Y- vanishes at x={x!r}")
        return float(self.det(x)) / dy

    def sliding_derivative(self, x: float, k: int = 1) -> float:
        """``k``-th derivative of the sliding field (away from ``x = 0``)."""
        if self.exact and k == 1:
            d, d1 = self.det_derivative(x, 0), self.det_derivative(x, 1)
            q, q1 = self.dY_derivative(x, 0), self.dY_derivative(x, 1)
            return (d1 * q - d * q1) / (q * q)
        return richardson_derivative(self.sliding, x, k).value


def sliding_vf(model: PwsModel, c, x: float, tol: Tolerances = DEFAULT) -> float:
    """Sliding field ``det Z / (Y+ - Y-)`` at ``(x, 0)``; at ``x = 0`` its limit ``nu(c)``."""
    return SwitchingLine(model, c).sliding(x, tol)


def det_Z(model: PwsModel, c, x):
    """``X- Y+ - X+ Y-`` at ``(x, 0)`` for the ``lam = 0`` slice."""
    return SwitchingLine(model, c).det(x)


def nu(model: PwsModel, c=None) -> float:
    return SwitchingLine(model, c).nu()


# ----------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class SwitchPointClass:
    """Class of a point of the switching line.

    ``tag`` is one of ``crossing``, ``stable-sliding``, ``unstable-sliding``,
    ``tangency``.  For tangencies ``side`` is ``above``, ``below`` or ``both``
    and ``visibility`` is ``visible``/``invisible``/``degenerate`` (for
    ``both`` the two answers are joined as ``"<above>/<below>"``).
    """

    tag: str
    side: Optional[str] = None
    visibility: Optional[str] = None


def _fold_visibility(X: float, dxY: float, upper: bool, tol: float) -> str:
    lie2 = X * dxY
    if abs(lie2) <= tol:
        return "degenerate"
    # an upper orbit curving back into y > 0 is visible; a lower one into y < 0
    if upper:
        return "visible" if lie2 > 0 else "invisible"
    return "visible" if lie2 < 0 else "invisible"


def classify_switch_point(model: PwsModel, c, x: float, tol: Tolerances = DEFAULT) -> SwitchPointClass:
    line = SwitchingLine(model, c)
    Xp, Yp, Xm, Ym = (float(v) for v in line.values(float(x)))
    tp = abs(Yp) <= tol.tau_sw
    tm = abs(Ym) <= tol.tau_sw
    if tp or tm:
        dYp, dYm = line.dxY(float(x))
        up = _fold_visibility(Xp, dYp, True, tol.tau_sw) if tp else None
        lo = _fold_visibility(Xm, dYm, False, tol.tau_sw) if tm else None
        if tp and tm:
            return SwitchPointClass("tangency", "both", f"{up}/{lo}")
        return SwitchPointClass("tangency", "above" if tp else "below", up or lo)
    if Yp * Ym > 0:
        return SwitchPointClass("crossing")
    if Yp < 0 < Ym:
        return SwitchPointClass("stable-sliding")
    return SwitchPointClass("unstable-sliding")


# ----------------------------------------------------------------------------
# two-fold certificate


@dataclass(frozen=True)
class Condition:
    name: str
    margin: float  # positive means satisfied by that much
    passed: bool


@dataclass(frozen=True)
class TwoFoldCertificate:
    passes: bool
    nu: float
    checked_conditions: tuple
    sliding_field_at_origin: float

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checked_conditions if not c.passed]


def certify_two_fold(model: PwsModel, c=None, window: float = 1.0, tol: Tolerances = DEFAULT, n: int = 200) -> TwoFoldCertificate:
    """Check that the origin is a visible-invisible two-fold with sliding on both sides.

    The line conditions (signs of ``Y+`` and ``Y-`` left and right of the
    origin) are checked on a geometric grid of ``0 < |x| <= window`` through
    the normalized quantity ``Y(x)/x`` so the margin does not collapse at the
    origin.
    """
    line = SwitchingLine(model, c)
    t = tol.tau_margin
    Xp0, Yp0, Xm0, Ym0 = (float(v) for v in line.values(0.0))
    dYp0, dYm0 = line.dxY(0.0)
    conds = []

    def add(name, margin, equality=False):
        ok = (abs(margin) <= t) if equality else (margin >= t)
        conds.append(Condition(name, float(-abs(margin) if equality else margin), bool(ok)))

    add("Y+(0,0) = 0", Yp0, equality=True)
    add("Y-(0,0) = 0", Ym0, equality=True)
    add("X+(0,0) > 0", Xp0)
    add("dY+/dx(0,0) > 0", dYp0)
    add("X-(0,0) < 0", -Xm0)
    add("dY-/dx(0,0) < 0", -dYm0)

    xs = np.geomspace(1e-6, window, n)
    _, Yp_r, _, Ym_r = line.values(xs)
    _, Yp_l, _, Ym_l = line.values(-xs)
    Yp_r, Ym_r, Yp_l, Ym_l = (np.asarray(v, dtype=float) / xs for v in (Yp_r, Ym_r, Yp_l, Ym_l))
    add("Y+(x,0) < 0 for x < 0", float(np.min(-Yp_l)))
    add("Y-(x,0) > 0 for x < 0", float(np.min(Ym_l)))
    add("Y+(x,0) > 0, Y-(x,0) < 0 for x > 0", float(min(np.min(Yp_r), np.min(-Ym_r))))

    nu_val = line.nu() if line.dY_derivative(0.0, 1) != 0.0 else float("nan")
    conds.append(Condition("nu(c) > 0", nu_val, bool(nu_val >= t)))
    passes = all(cd.passed for cd in conds)
    return TwoFoldCertificate(passes, nu_val, tuple(conds), nu_val)


# ----------------------------------------------------------------------------
# zeros of the sliding field


@dataclass(frozen=True)
class SlidingZero:
    """A zero of ``det Z`` (equivalently of the sliding field) on the switching line.

    ``exact`` is false when every derivative up to ``m_max`` vanished, in which
    case ``multiplicity`` holds ``m_max`` as a lower bound.
    """

    x0: float
    multiplicity: int
    position: str = "interior"  # interior | corner- | corner+
    exact: bool = True
    derivatives: tuple = field(default=(), compare=False)

    @property
    def parity(self) -> str:
        if not self.exact:
            return "unknown"
        return "even" if self.multiplicity % 2 == 0 else "odd"

    @property
    def label(self) -> str:
        return str(self.multiplicity) if self.exact else f">={self.multiplicity}"


def _derivs(line: SwitchingLine, x: float, upto: int) -> list[float]:
    return [line.det_derivative(x, k) for k in range(upto + 1)]


def _tau(tol: Tolerances, scale: float) -> float:
    return tol.tau_mult * max(1.0, scale)


def _rouche_ok(d: list[float], m: int, r: float, line: SwitchingLine, x: float) -> bool:
    """Lead Taylor term of order ``m`` dominates all others on ``|u| = r``."""
    terms = [abs(d[j]) / factorial(j) * r**j for j in range(len(d))]
    if line.exact:
        deg = len(line.det_poly) - 1
        for j in range(len(d), deg + 1):
            terms.append(abs(line.det_derivative(x, j)) / factorial(j) * r**j)
    lead = terms[m]
    return lead > sum(terms) - lead


def _multiplicity_at(line: SwitchingLine, x: float, tol: Tolerances, scale: float):
    """First nonvanishing derivative order at a point already known to be a zero."""
    tau = _tau(tol, scale)
    d = _derivs(line, x, tol.m_max)
    for m in range(1, tol.m_max + 1):
        if abs(d[m]) > tau:
            return m, True, d
    return tol.m_max, False, d


def _refine(line: SwitchingLine, x_start: float, lo: float, hi: float, tol: Tolerances, scale: float):
    """Locate a zero near ``x_start`` and its multiplicity.

    For ``m = 1, ..., m_max + 1`` the root of ``det^(m-1)`` nearest the start
    is polished (a simple root when the multiplicity is ``m``).  The highest
    order at whose polished root all lower derivatives vanish is accepted, so
    a poorly conditioned polish at a low order cannot cap the multiplicity.
    Order ``m_max + 1`` passing means ``>= m_max``.  Returns ``None`` for
    spurious candidates.
    """
    tau = _tau(tol, scale)
    best = None
    for m in range(1, tol.m_max + 2):
        f = lambda v, k=m - 1: line.det_derivative(v, k)  # noqa: E731
        df = lambda v, k=m: line.det_derivative(v, k)  # noqa: E731
        xm = newton_polish(f, df, x_start, lo, hi)
        if xm is None:
            continue
        d = _derivs(line, xm, tol.m_max)
        if not all(abs(d[j]) <= tau for j in range(min(m, tol.m_max + 1))):
            if best is not None:
                break
            continue
        if m > tol.m_max:
            return xm, tol.m_max, False, d
        if abs(d[m]) > tau:
            best = (xm, m, True, d)
    if best is not None:
        return best
    # derivatives vanish to every tested order at the start point
    d = _derivs(line, x_start, tol.m_max)
    if all(abs(v) <= tau for v in d):
        return x_start, tol.m_max, False, d
    return None


def find_sliding_zeros(model: PwsModel, c, interval, tol: Tolerances = DEFAULT, line: Optional[SwitchingLine] = None) -> list[SlidingZero]:
    """All zeros of ``det Z`` in ``[a, b]`` with multiplicities.

    Candidates come from sign changes and local minima of ``|det Z|`` on a
    uniform grid, each refined by :func:`_refine`.  A zero whose Taylor lead
    term does not dominate on the cluster radius means another zero may hide
    nearby and raises :class:`ZeroClusterError`.
    """
    a, b = map(float, interval)
    if a > b:
        a, b = b, a
    if a < 0.0 < b or min(abs(a), abs(b)) < tol.tau_sw:
        raise ValueError("search interval must exclude a neighborhood of the two-fold x = 0")
    line = line or SwitchingLine(model, c)
    xs = np.linspace(a, b, tol.zero_grid)
    fs = np.asarray(line.det(xs), dtype=float)
    scale = float(np.max(np.abs(fs)))
    afs = np.abs(fs)
    cand: list[float] = []
    for i in range(len(xs) - 1):
        if fs[i] == 0.0:
            cand.append(xs[i])
        elif fs[i] * fs[i + 1] < 0.0:
            # start from the secant root inside the bracket
            cand.append(xs[i] - fs[i] * (xs[i + 1] - xs[i]) / (fs[i + 1] - fs[i]))
    if fs[-1] == 0.0:
        cand.append(xs[-1])
    for i in range(len(xs)):
        left = afs[i - 1] if i > 0 else np.inf
        right = afs[i + 1] if i < len(xs) - 1 else np.inf
        if afs[i] <= left and afs[i] <= right and afs[i] < 1e-2 * max(scale, 1.0):
            cand.append(xs[i])

    h = (b - a) / (tol.zero_grid - 1)
    found: list[tuple] = []
    for x0 in sorted(cand):
        lo, hi = max(a, x0 - 2 * h), min(b, x0 + 2 * h)
        res = _refine(line, x0, lo, hi, tol, scale)
        if res is None:
            continue
        xz, m, exact, d = res
        if any(abs(xz - f[0]) <= tol.cluster_radius for f in found):
            continue
        found.append((xz, m, exact, d))

    out = []
    for xz, m, exact, d in sorted(found):
        if abs(xz) < 10 * tol.tau_sw:
            raise ZeroClusterError(f"sliding zero at {xz!r} too close to the two-fold")
        if exact and not _rouche_ok(d, m, tol.cluster_radius, line, xz):
            raise ZeroClusterError(
                f"zero cluster near x={xz!r} unresolved at grid resolution; increase grid or shrink cluster radius"
            )
        out.append(SlidingZero(float(xz), int(m), "interior", bool(exact), tuple(map(float, d))))
    return out


def corner_zero(line: SwitchingLine, x: float, position: str, tol: Tolerances = DEFAULT, scale: float = 1.0) -> Optional[SlidingZero]:
    """Corner test on ``|X_sl(x)|`` with the multiplicity taken at ``x`` itself."""
    v = abs(line.sliding(x, tol))
    if v < tol.tau_mult:
        m, exact, d = _multiplicity_at(line, x, tol, scale)
        return SlidingZero(float(x), int(m), position, bool(exact), tuple(map(float, d)))
    if v < 10 * tol.tau_mult:
        raise IndeterminateCorner(
            f"indeterminate corner at x={x!r}: |X_sl| = {v:.3e} lies between tau and 10*tau; tighten tolerances"
        )
    return None
