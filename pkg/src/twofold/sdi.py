"""Slow divergence integrals at ``eps = 0`` and divergence integrals along regularized orbits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad

from ._numerics import richardson_derivative
from .errors import (
    IntegrationTimeout,
    LeftNeighborhood,
    NumericalError,
    PoleError,
    SlidingRegionViolation,
)
from .filippov import SlidingZero, SwitchingLine, corner_zero, find_sliding_zeros
from .geometry import HalfMapResult, half_map
from .kernels import ESCAPED, EVENT, MODE_FAMILY, MODE_ORIGINAL, Event, System, integrate
from .model import PwsModel, RegularizedContext
from .regularization import Regularization
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class Divergent:
    """Marker for a slow divergence integral whose path meets a zero of the sliding field.

    ``sign`` is -1 or +1 for a definite limit and 0 when contributions of
    opposite sign meet (no limit).
    """

    sign: int
    zeros: tuple = ()

    def __float__(self) -> float:
        return {-1: -math.inf, 1: math.inf}.get(self.sign, math.nan)

    def __str__(self) -> str:
        lim = {-1: "-inf", 1: "+inf"}.get(self.sign, "indeterminate")
        where = ", ".join(f"{z:.12g}" for z in self.zeros)
        return f"Divergent({lim}; zeros at {where})"


Value = Union[float, Divergent]


def is_finite(v) -> bool:
    return not isinstance(v, Divergent) and v is not None and math.isfinite(v)


@dataclass(frozen=True)
class Multiplicity:
    """Order of the first non-negligible derivative; ``exact=False`` means ``>= m``."""

    m: int
    exact: bool = True
    reliable: bool = True
    derivatives: tuple = ()

    @property
    def label(self) -> str:
        return str(self.m) if self.exact else f">={self.m}"


@dataclass(frozen=True)
class SdiEvaluation:
    x: float
    pi_x: float
    I_value: Value
    I_minus: Value
    I_plus: Value
    dIdx_value: Optional[float] = None
    mult_I_at_eta_plus: Optional[Multiplicity] = None
    mult_dIdx_at_eta_plus: Optional[Multiplicity] = None
    quadrature_error_estimate: float = 0.0

    @property
    def finite(self) -> bool:
        return all(is_finite(v) for v in (self.I_value, self.I_minus, self.I_plus))

    @property
    def I_sign(self) -> Optional[int]:
        v = self.I_value
        if isinstance(v, Divergent):
            return v.sign or None
        return int(np.sign(v))


# ----------------------------------------------------------------------------
# integrand


class Integrand:
    """``g(s) = (Y+ - Y-)^2 / det Z * phi'(phi^{-1}(-Y- / (Y+ - Y-)))`` on ``y = 0``."""

    def __init__(self, model: PwsModel, reg: Regularization, c=None, line: Optional[SwitchingLine] = None):
        self.line = line or SwitchingLine(model, c)
        self.reg = reg

    def __call__(self, s: float) -> float:
        s = float(s)
        if s == 0.0:
            return 0.0  # removable: (Y+ - Y-)^2 / det Z vanishes linearly at the two-fold
        _, Yp, _, Ym = self.line.values(s)
        dY = float(Yp - Ym)
        det = float(self.line.det(s))
        if det == 0.0:
            raise PoleError(f"det Z vanishes at s = {s!r}: the integrand has a pole")
        u = -float(Ym) / dY
        if not 0.0 < u < 1.0:
            raise SlidingRegionViolation(f"s = {s!r} is not in the sliding set (-Y-/(Y+ - Y-) = {u:.6g})")
        return dY * dY / det * float(self.reg.phi_prime(self.reg.phi_inv(u)))


def sdi_integrand(model: PwsModel, reg: Regularization, c, s: float) -> float:
    return Integrand(model, reg, c)(s)


# ----------------------------------------------------------------------------
# integrals


def _path_zeros(line: SwitchingLine, a: float, b: float, tol: Tolerances) -> list[SlidingZero]:
    """Zeros of the sliding field on the closed path ``[a, b]`` (two-fold excluded)."""
    grid = np.linspace(min(a, b), max(a, b), tol.zero_grid)
    scale = float(np.max(np.abs(line.det(grid))))
    zeros = []
    for x, pos in ((a, "corner-"), (b, "corner+")):
        if x != 0.0:
            z = corner_zero(line, x, pos, tol, scale)
            if z is not None:
                zeros.append(z)
    delta = 10 * tol.tau_sw
    for lo, hi in ((a, -delta), (delta, b)):
        if hi - lo <= 2 * delta:
            continue
        for z in find_sliding_zeros(line.model, line.c, (lo, hi), tol, line=line):
            if not any(abs(z.x0 - k.x0) <= tol.cluster_radius for k in zeros):
                zeros.append(z)
    return sorted(zeros, key=lambda z: z.x0)


def _divergence(zeros: Sequence[SlidingZero], sign_of_side: Callable[[float], int]) -> Divergent:
    signs = set()
    for z in zeros:
        if z.position == "interior" and z.parity != "even":
            signs.add(0)  # the integrand changes sign across the zero
        else:
            signs.add(sign_of_side(z.x0))
    sign = signs.pop() if len(signs) == 1 else 0
    return Divergent(sign, tuple(float(z.x0) for z in zeros))


def _quad(g, a: float, b: float, tol: Tolerances):
    if a == b:
        return 0.0, 0.0
    val, err, info = quad(g, a, b, epsabs=tol.quad_abs, epsrel=tol.quad_rel, limit=400, full_output=1)[:3]
    if not np.isfinite(val):
        raise NumericalError(f"quadrature on [{a:.6g}, {b:.6g}] returned a non-finite value")
    if err > max(1e3 * tol.quad_rel * abs(val), 1e3 * tol.quad_abs):
        raise NumericalError(f"quadrature on [{a:.6g}, {b:.6g}] did not converge (error estimate {err:.3e})")
    return float(val), float(err)


def sdi_I(
    model: PwsModel,
    reg: Regularization,
    c,
    x: float,
    tol: Tolerances = DEFAULT,
    hm: Optional[HalfMapResult] = None,
) -> SdiEvaluation:
    """``I(x) = int_{Pi(x)}^{x} g``, ``I-(Pi(x)) = int_{Pi(x)}^0 g`` and ``I+(x) = int_x^0 g``.

    A sliding zero anywhere on the closed path turns the affected value into
    :class:`Divergent`.  ``I`` is integrated in one pass over ``[Pi(x), x]``
    (split at the two-fold), independently of the one-sided integrals.
    """
    cc = model.resolve_c(c)
    hm = hm or half_map(model, cc, x, tol)
    px = hm.x_out
    line = SwitchingLine(model, cc)
    g = Integrand(model, reg, cc, line)

    zeros = _path_zeros(line, px, x, tol)
    neg = [z for z in zeros if z.x0 < 0]
    pos = [z for z in zeros if z.x0 > 0]
    # g < 0 on the stable side and > 0 on the unstable side; both one-sided integrals tend to -inf
    I_minus: Value = _divergence(neg, lambda _: -1) if neg else None
    I_plus: Value = _divergence(pos, lambda _: -1) if pos else None
    err = 0.0
    if I_minus is None:
        I_minus, e = _quad(g, px, 0.0, tol)
        err += e
    if I_plus is None:
        v, e = _quad(g, 0.0, x, tol)
        I_plus, err = -v, err + e
    if zeros:
        I_value: Value = _divergence(zeros, lambda x0: -1 if x0 < 0 else 1)
    else:
        left, e1 = _quad(g, px, 0.0, tol)
        right, e2 = _quad(g, 0.0, x, tol)
        I_value, err = left + right, max(err, e1 + e2)
    return SdiEvaluation(float(x), float(px), I_value, I_minus, I_plus, quadrature_error_estimate=err)


def sdi_dIdx(
    model: PwsModel,
    reg: Regularization,
    c,
    x: float,
    tol: Tolerances = DEFAULT,
    hm: Optional[HalfMapResult] = None,
) -> float:
    """``g(x) - Pi'(x) g(Pi(x))``; needs regular endpoints only."""
    cc = model.resolve_c(c)
    hm = hm or half_map(model, cc, x, tol)
    g = Integrand(model, reg, cc)
    line = g.line
    for pt, name in ((x, "x"), (hm.x_out, "Pi(x)")):
        if abs(float(line.det(pt))) <= tol.tau_mult:
            raise PoleError(f"sliding field vanishes at the endpoint {name} = {pt:.12g}; dI/dx undefined there")
    return float(g(x) - hm.derivative * g(hm.x_out))


def zero_multiplicity(
    f: Callable[[float], float],
    x0: float,
    m_max: int = DEFAULT.m_max,
    tau: float = DEFAULT.tau_mult,
    scale: float = 1.0,
    h0: Optional[float] = None,
) -> Multiplicity:
    """Smallest ``k <= m_max`` with ``|f^(k)(x0)| > tau * scale`` (``k = 0`` means no zero).

    An estimate that clears the threshold only through rounding noise gives
    ``exact=False``: the order is then known to be at least ``k`` but not resolved.

    Derivatives are Richardson-extrapolated central differences; function
    values are cached since ``f`` is typically expensive.
    """
    cache: dict[float, float] = {}

    def fc(v):
        if v not in cache:
            cache[v] = float(f(v))
        return cache[v]

    thr = tau * max(1.0, scale)
    ders, reliable = [], True
    for k in range(m_max + 1):
        est = richardson_derivative(fc, x0, k, h0=h0)
        ders.append(est.value)
        reliable = reliable and est.reliable
        if abs(est.value) > thr:
            if est.reliable or abs(est.value) > 10.0 * est.error:
                return Multiplicity(k, True, reliable, tuple(ders))
            # above threshold only through amplified rounding noise: order k is not resolvable
            return Multiplicity(k, False, False, tuple(ders))
    return Multiplicity(m_max, False, reliable, tuple(ders))


def sdi_evaluate(
    model: PwsModel,
    reg: Regularization,
    c,
    eta_plus: float,
    tol: Tolerances = DEFAULT,
    multiplicities: bool = True,
) -> SdiEvaluation:
    """Everything the cyclicity engine may ask for at the corner ``eta_plus``.

    ``dI/dx`` is skipped (``None``) when a corner is a zero of the sliding
    field; multiplicities are computed only where the function vanishes.
    """
    cc = model.resolve_c(c)
    hm = half_map(model, cc, eta_plus, tol)
    ev = sdi_I(model, reg, cc, eta_plus, tol, hm)
    try:
        d = sdi_dIdx(model, reg, cc, eta_plus, tol, hm)
    except PoleError:
        d = None
    mult_I = mult_d = None
    if multiplicities and d is not None:
        h = 0.02 * min(eta_plus, abs(hm.x_out))
        if is_finite(ev.I_value) and abs(ev.I_value) <= tol.tau_mult:
            mult_I = zero_multiplicity(lambda v: _I_only(model, reg, cc, v, tol), eta_plus, tol.m_max, tol.tau_mult, h0=h)
        if abs(d) <= tol.tau_mult:
            mult_d = zero_multiplicity(lambda v: sdi_dIdx(model, reg, cc, v, tol), eta_plus, tol.m_max, tol.tau_mult, h0=h)
        else:
            mult_d = Multiplicity(0, True, True, (d,))
    return SdiEvaluation(
        ev.x, ev.pi_x, ev.I_value, ev.I_minus, ev.I_plus, d, mult_I, mult_d, ev.quadrature_error_estimate
    )


def _I_only(model, reg, c, x, tol):
    v = sdi_I(model, reg, c, x, tol).I_value
    if isinstance(v, Divergent):
        raise PoleError(f"I diverges at x = {x:.12g}")
    return v


def sdi_curve(model: PwsModel, reg: Regularization, c, xs, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Rows ``(x, I, dIdx, divergent_flag)`` for CSV export; divergent values are NaN."""
    rows = []
    for x in xs:
        hm = half_map(model, c, float(x), tol)
        ev = sdi_I(model, reg, c, float(x), tol, hm)
        try:
            d = sdi_dIdx(model, reg, c, float(x), tol, hm)
        except PoleError:
            d = math.nan
        div = isinstance(ev.I_value, Divergent)
        rows.append((float(x), math.nan if div else ev.I_value, d, 1.0 if div else 0.0))
    return np.array(rows, dtype=float).reshape(-1, 4)


# ----------------------------------------------------------------------------
# eps > 0: divergence along regularized orbits


@dataclass(frozen=True)
class OrbitDivergenceResult:
    """``I_tilde = eps^2 * int div dt`` along an orbit of the regularized field.

    For ``direction = -1`` the orbit is followed backward in time and the
    integral carries the corresponding sign (minus the forward-time integral
    over the same arc).
    """

    I_tilde: float
    eps: float
    chart: str
    start: tuple
    end: tuple
    time: float  # elapsed time in original units
    status: str
    stats: dict = field(default_factory=dict, repr=False)
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)


def orbit_divergence_integral(
    model: PwsModel,
    reg: Regularization,
    ctx: RegularizedContext,
    start: Sequence[float],
    section: Event,
    tol: Tolerances = DEFAULT,
    direction: float = 1.0,
    chart: str = "family",
    record: bool = False,
    backend: Optional[str] = None,
) -> OrbitDivergenceResult:
    """Integrate from ``start`` (physical coordinates) to ``section`` and return ``eps^2 * D``.

    ``chart="family"`` integrates in ``(x, y / eps^2)`` with time rescaled by
    ``eps^2``, ``chart="original"`` in the physical coordinates; both
    accumulate the same physical divergence integral.
    """
    eps = ctx.eps
    if not eps > 0:
        raise ValueError("orbit divergence integrals need eps > 0")
    x0, y0 = float(start[0]), float(start[1])
    if abs((x0, y0)[section.coord] - section.value) <= tol.event_tol:
        return OrbitDivergenceResult(0.0, eps, chart, (x0, y0), (x0, y0), 0.0, "on-section")

    e2 = eps * eps
    t_phys = tol.t_budget / e2
    if chart == "family":
        mode, z0, span = MODE_FAMILY, (x0, y0 / e2), t_phys / e2
        ev = _scale_event(section, e2)
    elif chart == "original":
        mode, z0, span, ev = MODE_ORIGINAL, (x0, y0), t_phys, section
    else:
        raise ValueError(f"unknown chart {chart!r}")
    sysm = System(model, reg, ctx, mode=mode, direction=direction, backend=backend)
    sol = integrate(sysm, z0, span, events=(ev,), tol=tol, record=record)
    if sol.status == ESCAPED:
        raise LeftNeighborhood(f"orbit from ({x0:.6g}, {y0:.6g}) left the box before reaching the section")
    if sol.status != EVENT:
        raise IntegrationTimeout(
            f"section not reached from ({x0:.6g}, {y0:.6g}) within {t_phys:.3g} time units (status {sol.status_name})"
        )
    yend = sol.y * e2 if mode == MODE_FAMILY else sol.y
    elapsed = sol.t * e2 if mode == MODE_FAMILY else sol.t
    traj = None
    if record and sol.trajectory is not None:
        traj = sol.trajectory.copy()
        if mode == MODE_FAMILY:
            traj[:, 0] *= e2
            traj[:, 2] *= e2
    return OrbitDivergenceResult(
        e2 * sol.D, eps, chart, (x0, y0), (sol.x, float(yend)), float(elapsed), sol.status_name, sol.stats, traj
    )


def _scale_event(ev: Event, e2: float) -> Event:
    if ev.coord == 1:
        return Event(1, ev.value / e2, ev.direction, ev.lo, ev.hi)
    return Event(0, ev.value, ev.direction, ev.lo / e2, ev.hi / e2)


def critical_y2(model: PwsModel, reg: Regularization, c, x: float) -> float:
    """``phi^{-1}(-Y-/(Y+ - Y-))`` at ``(x, 0)``: the layer equilibrium above ``x``."""
    line = SwitchingLine(model, c)
    _, Yp, _, Ym = line.values(float(x))
    u = -float(Ym) / float(Yp - Ym)
    if not 0.0 < u < 1.0:
        raise SlidingRegionViolation(f"x = {x!r} is not in the sliding set")
    return float(reg.phi_inv(u))


def I_tilde_minus(
    model: PwsModel,
    reg: Regularization,
    ctx: RegularizedContext,
    x: float,
    y2_start: Optional[float] = -25.0,
    tol: Tolerances = DEFAULT,
    chart: str = "family",
) -> OrbitDivergenceResult:
    """Forward orbit from ``(x, eps^2 y2_start)``, ``x < 0``, to the section ``x = 0``.

    ``y2_start=None`` starts on the critical curve of the layer problem.
    """
    if not x < 0:
        raise ValueError("the stable side needs x < 0")
    y0 = ctx.eps**2 * (critical_y2(model, reg, ctx.c, x) if y2_start is None else y2_start)
    return orbit_divergence_integral(model, reg, ctx, (x, y0), Event(0, 0.0, 1), tol, 1.0, chart)


def I_tilde_plus(
    model: PwsModel,
    reg: Regularization,
    ctx: RegularizedContext,
    x: float,
    y2_start: Optional[float] = -25.0,
    tol: Tolerances = DEFAULT,
    chart: str = "family",
) -> OrbitDivergenceResult:
    """Backward orbit from ``(x, eps^2 y2_start)``, ``x > 0``, to the section ``x = 0``."""
    if not x > 0:
        raise ValueError("the unstable side needs x > 0")
    y0 = ctx.eps**2 * (critical_y2(model, reg, ctx.c, x) if y2_start is None else y2_start)
    return orbit_divergence_integral(model, reg, ctx, (x, y0), Event(0, 0.0, -1), tol, -1.0, chart)
