"""Lower-field half map, sliding cycle construction and case classification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CycleAssumptionError, IndeterminateCorner, IntegrationTimeout
from .filippov import SlidingZero, SwitchingLine, corner_zero, find_sliding_zeros
from .model import PwsModel
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class HalfMapResult:
    """Landing point and derivative of the lower-field map from ``{y=0, x>0}`` to ``{y=0, x<0}``.

    ``derivative`` comes from the variational equations and
    ``derivative_liouville`` from the divergence formula; ``agreement`` is
    their relative difference.
    """

    x_in: float
    x_out: float
    derivative: float
    derivative_liouville: float
    transit_time: float
    s0_candidate: float
    orbit: np.ndarray = field(repr=False)  # columns t, x, y
    agreement: float = 0.0

    @property
    def certified(self) -> bool:
        return self.agreement <= 1e-6


def _lower_rhs(lower):
    def rhs(t, u):
        x, y = u[0], u[1]
        X, Y = lower.value(x, y)
        J = lower.jacobian(x, y)
        p = u[2:6].reshape(2, 2)
        dp = J @ p
        return np.concatenate(([X, Y], dp.ravel(), [J[0, 0] + J[1, 1]]))

    return rhs


def half_map(model: PwsModel, c, x: float, tol: Tolerances = DEFAULT, n_orbit: int = 400) -> HalfMapResult:
    """Follow ``Z-`` alone from ``(x, 0)`` until it returns to ``y = 0``."""
    x = float(x)
    if x <= 0.0:
        raise ValueError("half map starts on the positive half-line")
    _, lower = model.fields(0.0, c)
    X0, Y0 = (float(v) for v in lower.value(x, 0.0))
    if not Y0 < 0.0:
        raise CycleAssumptionError(f"Y-({x}, 0) = {Y0:.3e} is not negative; the orbit does not enter y < 0")
    rhs = _lower_rhs(lower)
    box = tol.box

    def ev_return(t, u):
        return u[1]

    ev_return.terminal = True
    ev_return.direction = 1.0

    def ev_axis(t, u):
        return u[0]

    ev_axis.terminal = False
    ev_axis.direction = 0.0

    def ev_box(t, u):
        return box - max(abs(u[0]), abs(u[1]))

    ev_box.terminal = True
    ev_box.direction = -1.0

    def ev_singular(t, u):
        X, Y = lower.value(u[0], u[1])
        return np.hypot(X, Y) - 1e-10

    ev_singular.terminal = True
    ev_singular.direction = -1.0

    u0 = np.concatenate(([x, 0.0], np.eye(2).ravel(), [0.0]))
    sol = solve_ivp(
        rhs,
        (0.0, tol.t_max),
        u0,
        method="DOP853",
        rtol=tol.halfmap_rtol,
        atol=tol.halfmap_atol,
        events=(ev_return, ev_axis, ev_box, ev_singular),
        dense_output=True,
    )
    if len(sol.t_events[2]):
        raise CycleAssumptionError(f"orbit from ({x}, 0) escapes the box [-{box}, {box}]^2 (A3 violated)")
    if len(sol.t_events[3]):
        raise CycleAssumptionError(f"orbit from ({x}, 0) runs into a singularity of Z- (A3 violated, singular encounter)")
    if not len(sol.t_events[0]):
        raise IntegrationTimeout(f"no return to y = 0 within T_max = {tol.t_max}")

    T = float(sol.t_events[0][0])
    u = np.array(sol.y_events[0][0], dtype=float)
    # polish the landing onto y = 0 by short flow corrections
    for _ in range(5):
        if abs(u[1]) < 0.1 * tol.event_tol:
            break
        X, Y = lower.value(u[0], u[1])
        dt = -u[1] / Y
        u = u + dt * rhs(T, u)
        T += dt
    u[1] = 0.0 if abs(u[1]) < tol.event_tol else u[1]

    x_out = float(u[0])
    Xe, Ye = (float(v) for v in lower.value(x_out, 0.0))
    phi = u[2:6].reshape(2, 2)
    d_var = float(phi[0, 0] - (Xe / Ye) * phi[1, 0])
    d_liou = float((Y0 / Ye) * np.exp(u[6]))
    agree = abs(d_var - d_liou) / max(abs(d_liou), 1e-300)

    s0 = np.nan
    if len(sol.t_events[1]):
        s0 = float(sol.y_events[1][0][1])
    ts = np.linspace(0.0, T, n_orbit)
    pts = sol.sol(np.minimum(ts, sol.t[-1]))
    orbit = np.column_stack([ts, pts[0], pts[1]])
    orbit[0, 1:] = (x, 0.0)
    orbit[-1, 1:] = (x_out, 0.0)
    return HalfMapResult(x, x_out, d_var, d_liou, T, s0, orbit, agree)


# ----------------------------------------------------------------------------
# sliding cycles


@dataclass(frozen=True)
class SlidingCycle:
    """Sliding segment ``[eta_minus, eta_plus]`` closed by the lower orbit from ``eta_plus``."""

    eta_plus: float
    eta_minus: float
    zeros: tuple  # all SlidingZero, sorted by location
    half_map: HalfMapResult = field(repr=False)
    s0: float
    model: PwsModel = field(repr=False)
    c: tuple = ()

    @property
    def corner_minus(self) -> Optional[SlidingZero]:
        return next((z for z in self.zeros if z.position == "corner-"), None)

    @property
    def corner_plus(self) -> Optional[SlidingZero]:
        return next((z for z in self.zeros if z.position == "corner+"), None)

    @property
    def interior(self) -> list:
        return [z for z in self.zeros if z.position == "interior"]


def check_sliding_interval(line: SwitchingLine, a: float, b: float, n: int = 512, tol: Tolerances = DEFAULT) -> None:
    """Raise unless ``[a, 0)`` is stable sliding and ``(0, b]`` unstable sliding."""
    for lo, hi, want in ((a, 0.0, "stable"), (0.0, b, "unstable")):
        xs = np.linspace(lo, hi, n)[:-1] if want == "stable" else np.linspace(lo, hi, n)[1:]
        _, Yp, _, Ym = line.values(xs)
        Yp = np.asarray(Yp, dtype=float)
        Ym = np.asarray(Ym, dtype=float)
        ok = (Yp < 0) & (Ym > 0) if want == "stable" else (Yp > 0) & (Ym < 0)
        if not np.all(ok):
            bad = float(xs[np.argmin(ok)])
            raise CycleAssumptionError(f"x = {bad:.6g} is not {want} sliding; [eta-, eta+] must lie in the sliding set")


def build_cycle(model: PwsModel, c, eta_plus: float, tol: Tolerances = DEFAULT) -> SlidingCycle:
    cc = model.resolve_c(c)
    hm = half_map(model, cc, eta_plus, tol)
    eta_minus = hm.x_out
    line = SwitchingLine(model, cc)
    check_sliding_interval(line, eta_minus, eta_plus, tol=tol)
    delta = 10 * tol.tau_sw
    grid = np.linspace(eta_minus, eta_plus, tol.zero_grid)
    scale = float(np.max(np.abs(line.det(grid))))

    corners = []
    for x, pos in ((eta_minus, "corner-"), (eta_plus, "corner+")):
        z = corner_zero(line, x, pos, tol, scale)
        if z is not None:
            corners.append(z)
    interior = []
    for a, b in ((eta_minus, -delta), (delta, eta_plus)):
        for z in find_sliding_zeros(model, cc, (a, b), tol, line=line):
            if any(abs(z.x0 - k.x0) <= tol.cluster_radius for k in corners):
                continue
            if abs(z.x0 - eta_minus) <= tol.cluster_radius or abs(z.x0 - eta_plus) <= tol.cluster_radius:
                raise IndeterminateCorner(
                    f"sliding zero at x = {z.x0:.12g} lies within the cluster radius of a corner "
                    "whose sliding field is not below tau; tighten tolerances"
                )
            interior.append(z)
    zeros = tuple(sorted(corners + interior, key=lambda z: z.x0))
    s0 = hm.s0_candidate
    return SlidingCycle(float(eta_plus), float(eta_minus), zeros, hm, s0, model, cc)


@dataclass(frozen=True)
class CaseLabel:
    """Configuration of the sliding cycle.

    ``tag`` is one of ``I, II, III, IV, V, V-mirror, VI, VII, VIII,
    excluded, uncovered``.  For VII/VIII the final verdict still depends on
    the corner ratio test done by the cyclicity engine.
    """

    tag: str
    reason: str = ""
    m_minus: Optional[int] = None
    m_plus: Optional[int] = None


def classify_case(cycle: SlidingCycle) -> CaseLabel:
    interior = cycle.interior
    cm, cp = cycle.corner_minus, cycle.corner_plus
    odd = [z for z in interior if z.parity == "odd"]
    if odd:
        return CaseLabel("excluded", f"odd-multiplicity interior zero at x = {odd[0].x0:.10g}")
    unknown = [z for z in interior if not z.exact]
    if unknown:
        return CaseLabel("uncovered", f"interior zero at x = {unknown[0].x0:.10g} has multiplicity beyond the tested order")
    mm = cm.multiplicity if cm else None
    mp = cp.multiplicity if cp else None
    if cm is None and cp is None:
        if not interior:
            return CaseLabel("I", "sliding field has no zeros on the cycle")
        return CaseLabel("II", "only even interior zeros, regular corners")
    if cp is None:
        if not any(z.x0 > 0 for z in interior):
            return CaseLabel("III", "corner zero at eta-, regular unstable interval", mm, None)
        return CaseLabel("V", "corner zero at eta-, zeros in the unstable interval", mm, None)
    if cm is None:
        if not any(z.x0 < 0 for z in interior):
            return CaseLabel("IV", "corner zero at eta+, regular stable interval", None, mp)
        return CaseLabel("V-mirror", "corner zero at eta+, zeros in the stable interval", None, mp)
    if not (cm.exact and cp.exact):
        return CaseLabel("uncovered", "corner multiplicity beyond the tested order", mm, mp)
    if mm != mp:
        return CaseLabel("VI", "corner zeros of different multiplicity", mm, mp)
    if mm == 1:
        if not interior:
            return CaseLabel("VII", "hyperbolic corners, no interior zeros", 1, 1)
        return CaseLabel("VIII", "hyperbolic corners with interior zeros", 1, 1)
    return CaseLabel("uncovered", f"equal corner multiplicities m- = m+ = {mm} > 1", mm, mp)
