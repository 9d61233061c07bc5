"""Blow-up chart vector fields and the slow-manifold / invariant-line checks built on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AssumptionError
from .filippov import SwitchingLine
from .kernels import MODE_FAMILY, System, integrate
from .model import PwsModel, RegularizedContext
from .regularization import Regularization
from .tolerances import DEFAULT, Tolerances

CHARTS = ("family", "phase", "second")


@dataclass(frozen=True)
class BlowupChartModel:
    """One chart of the blown-up regularized system.

    * ``family``: state ``(x2, y2, r2)`` with ``(x, y, eps) = (x2, r2^2 y2, r2)``,
      time multiplied by ``r2^2``.
    * ``phase``: state ``(x1, r1, e1)`` with ``(x, y, eps) = (x1, -r1^2, r1 e1)``.
    * ``second``: state ``(xh2, y2)``, the rescaling ``x2 = rho2 xh2`` of the
      family chart near the two-fold, restricted to ``rho2 = 0`` and ``lambda_tilde = 0``.
    """

    chart: str
    model: PwsModel
    reg: Regularization
    c: tuple = ()
    lambda_tilde: float = 0.0
    _line: SwitchingLine = field(init=False, repr=False, compare=False)
    _cache: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}; choose from {CHARTS}")
        cc = self.model.resolve_c(self.c or None)
        object.__setattr__(self, "c", cc)
        object.__setattr__(self, "_line", SwitchingLine(self.model, cc))

    @property
    def y2_star(self) -> float:
        """Height of the invariant line through the two-fold in the family chart."""
        dYp, dYm = self._line.dxY(0.0)
        return float(self.reg.phi_inv(-dYm / (dYp - dYm)))

    @property
    def p0(self) -> tuple:
        return (0.0, self.y2_star)

    def critical_curve(self, x2: float) -> float:
        """``y2`` of the layer equilibrium over ``x2`` (the curve of singularities off the two-fold)."""
        _, Yp, _, Ym = self._line.values(float(x2))
        return float(self.reg.phi_inv(-Ym / (Yp - Ym)))

    def normal_eigenvalue(self, x2: float) -> float:
        """Nontrivial eigenvalue ``(Y+ - Y-)(x2, 0) phi'(y_C(x2))`` of the layer problem."""
        return float(self._line.dY(float(x2))) * float(self.reg.phi_prime(self.critical_curve(x2)))

    def fields_at(self, lam: float):
        lam = float(lam)
        if lam not in self._cache:
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[lam] = self.model.fields(lam, self.c)
        return self._cache[lam]


def _blend(up, lo, x, y, w):
    Xp, Yp = up.value(x, y)
    Xm, Ym = lo.value(x, y)
    return Xp * w + Xm * (1.0 - w), Yp * w + Ym * (1.0 - w)


def chart_field(chart: BlowupChartModel, state: Sequence[float]) -> np.ndarray:
    """Right-hand side of the selected chart system."""
    reg = chart.reg
    if chart.chart == "family":
        x2, y2, r2 = map(float, state)
        if r2 < 0:
            raise ValueError("family chart needs r2 >= 0")
        up, lo = chart.fields_at(r2 * chart.lambda_tilde)
        X, Y = _blend(up, lo, x2, r2 * r2 * y2, float(reg.phi(y2)))
        return np.array([r2 * r2 * X, Y, 0.0])
    if chart.chart == "phase":
        x1, r1, e1 = map(float, state)
        if r1 < 0 or e1 < 0:
            raise ValueError("phase chart needs r1 >= 0 and e1 >= 0")
        up, lo = chart.fields_at(r1 * e1 * chart.lambda_tilde)
        X, Y = _blend(up, lo, x1, -r1 * r1, float(reg.phi_minus(e1 * e1)))
        return np.array([r1 * r1 * X, -0.5 * r1 * Y, 0.5 * e1 * Y])
    xh, y2 = map(float, state)
    up, lo = chart.fields_at(0.0)
    w = float(reg.phi(y2))
    X, _ = _blend(up, lo, 0.0, 0.0, w)
    dYp, dYm = chart._line.dxY(0.0)
    return np.array([X, xh * (dYp * w + dYm * (1.0 - w))])


def phase_edge_jacobian(chart: BlowupChartModel, x1: float) -> np.ndarray:
    """Exact Jacobian of the phase chart at an edge point ``(x1, 0, 0)``.

    At ``r1 = e1 = 0`` every entry except the two diagonal ones carries a
    factor ``r1`` or ``e1`` and vanishes; the diagonal entries are
    ``-Y/2`` and ``Y/2`` with ``Y`` the blended normal component at
    ``phi_minus(0)``.
    """
    if chart.chart != "phase":
        raise ValueError("edge Jacobian is defined for the phase chart")
    up, lo = chart.fields_at(0.0)
    _, Y = _blend(up, lo, float(x1), 0.0, float(chart.reg.phi_minus(0.0)))
    return np.diag([0.0, -0.5 * Y, 0.5 * Y])


def phase_edge_eigenvalues(chart: BlowupChartModel, x1: float) -> np.ndarray:
    return np.linalg.eigvals(phase_edge_jacobian(chart, x1)).real


def gamma_invariance_check(
    model: PwsModel, reg: Regularization, c=None, xh_grid=None, offset: float = 0.0
) -> float:
    """Max ``|dy2/dt|`` of the second-blow-up chart on ``y2 = y2* + offset``."""
    ch = BlowupChartModel("second", model, reg, model.resolve_c(c))
    xs = np.linspace(-5.0, 5.0, 201) if xh_grid is None else np.asarray(xh_grid, dtype=float)
    y = ch.y2_star + offset
    return float(max(abs(chart_field(ch, (x, y))[1]) for x in xs))


# ----------------------------------------------------------------------------
# slow dynamics along the critical curve


@dataclass(frozen=True)
class SlowDynamicsResult:
    r2: float
    x_start: tuple
    x_measured: tuple
    speed: tuple  # dx2/dt divided by r2^2 on the slow manifold
    sliding: tuple  # sliding field at the same x2
    normal_eigenvalue: tuple
    max_deviation: float


def slow_dynamics_check(
    model: PwsModel,
    reg: Regularization,
    c,
    x_range: tuple,
    r2: float,
    n: int = 7,
    lambda_tilde: float = 0.0,
    settle: float = 30.0,
    tol: Tolerances = DEFAULT,
    backend=None,
) -> SlowDynamicsResult:
    """Drift speed along the slow manifold compared with the sliding field.

    Each start on the critical curve is relaxed onto the slow manifold by
    integrating the family chart for ``settle`` fast time constants (forward
    on the attracting side, backward on the repelling side); the drift speed
    ``dx2/dt / r2^2`` is then read off the chart field at the relaxed point.
    """
    cc = model.resolve_c(c)
    ch = BlowupChartModel("family", model, reg, cc, lambda_tilde)
    line = SwitchingLine(model, cc)
    a, b = x_range
    xs = np.linspace(a, b, n)
    if a < 0 < b:
        raise ValueError("the range must not contain the two-fold")
    ctx = RegularizedContext(r2, lambda_tilde, cc)
    speeds, slides, eigs, meas = [], [], [], []
    for x in xs:
        if abs(float(line.dY(x))) < 1e-6:
            raise AssumptionError(f"normal hyperbolicity lost at x2 = {x:.6g} (Y+ - Y- vanishes)")
        mu = ch.normal_eigenvalue(x)
        if abs(mu) < 1e-6:
            raise AssumptionError(f"normal hyperbolicity lost at x2 = {x:.6g} (eigenvalue {mu:.3e})")
        direction = 1.0 if mu < 0 else -1.0
        sysm = System(model, reg, ctx, mode=MODE_FAMILY, direction=direction, backend=backend)
        sol = integrate(sysm, (x, ch.critical_curve(x)), settle / abs(mu), tol=tol)
        xm, y2 = sol.x, sol.y
        v = chart_field(ch, (xm, y2, r2))[0] / (r2 * r2)
        speeds.append(float(v))
        slides.append(float(line.sliding(xm)))
        eigs.append(float(mu))
        meas.append(float(xm))
    dev = max(abs(v - s) / abs(s) for v, s in zip(speeds, slides))
    return SlowDynamicsResult(float(r2), tuple(map(float, xs)), tuple(meas), tuple(speeds), tuple(slides), tuple(eigs), float(dev))
