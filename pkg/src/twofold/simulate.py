"""Simulation of the regularized flow: orbits, first-return maps on ``x = 0`` and limit-cycle counts."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from .errors import (
    ChartDisagreement,
    CycleAssumptionError,
    GridRefinementRequired,
    IntegrationTimeout,
    LeftNeighborhood,
    NumericalError,
)
from .geometry import SlidingCycle
from .kernels import ESCAPED, EVENT, MODE_FAMILY, MODE_ORIGINAL, STATUS_NAMES, Event, System
from .kernels import integrate as _integrate
from .model import PwsModel, RegularizedContext
from .regularization import Regularization
from .tolerances import DEFAULT, Tolerances

_MODES = {"original": MODE_ORIGINAL, "family": MODE_FAMILY}


# ----------------------------------------------------------------------------
# orbits


@dataclass
class Orbit:
    """A recorded orbit in physical coordinates; ``D`` is the accumulated divergence integral."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    D: np.ndarray
    status: str
    event_index: int = -1
    stats: dict = field(default_factory=dict, repr=False)

    @property
    def end(self) -> tuple:
        return float(self.x[-1]), float(self.y[-1])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.y, self.D])


def _physical(traj: np.ndarray, mode: int, eps: float) -> np.ndarray:
    out = np.array(traj, dtype=float, copy=True)
    if mode == MODE_FAMILY:
        e2 = eps * eps
        out[:, 0] *= e2  # time
        out[:, 2] *= e2  # y
    return out


def _chart_event(ev: Event, mode: int, eps: float) -> Event:
    if mode != MODE_FAMILY:
        return ev
    e2 = eps * eps
    if ev.coord == 1:
        return Event(1, ev.value / e2, ev.direction, ev.lo, ev.hi)
    return Event(0, ev.value, ev.direction, ev.lo / e2, ev.hi / e2)


def integrate(
    model: PwsModel,
    reg: Regularization,
    ctx: RegularizedContext,
    z0: Sequence[float],
    t_span: float,
    events: Sequence[Event] = (),
    tol: Tolerances = DEFAULT,
    chart: str = "original",
    direction: float = 1.0,
    backend: Optional[str] = None,
) -> Orbit:
    """Integrate the regularized field from ``z0`` over ``t_span`` (physical time) or until an event.

    Events and the returned orbit use physical coordinates whatever the chart.
    """
    if not ctx.eps > 0:
        raise ValueError("simulation needs eps > 0")
    mode = _MODES[chart]
    e2 = ctx.eps**2
    sysm = System(model, reg, ctx, mode=mode, direction=direction, backend=backend)
    start = (float(z0[0]), float(z0[1]) / e2 if mode == MODE_FAMILY else float(z0[1]))
    span = t_span / e2 if mode == MODE_FAMILY else t_span
    evs = [_chart_event(e, mode, ctx.eps) for e in events]
    sol = _integrate(sysm, start, span, evs, tol=tol, record=True)
    tr = _physical(sol.trajectory, mode, ctx.eps)
    return Orbit(tr[:, 0], tr[:, 1], tr[:, 2], tr[:, 3], sol.status_name, sol.event_index, sol.stats)


# ----------------------------------------------------------------------------
# the sliding cycle as a point cloud


@dataclass
class CycleGeometry:
    """Dense samples of the sliding cycle for distance queries."""

    eta_minus: float
    eta_plus: float
    s0: float
    points: np.ndarray = field(repr=False)
    _tree: Optional[cKDTree] = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def from_cycle(cls, cycle: SlidingCycle, n: int = 4000) -> "CycleGeometry":
        slide = np.column_stack([np.linspace(cycle.eta_minus, cycle.eta_plus, n), np.zeros(n)])
        orb = cycle.half_map.orbit
        t = orb[:, 0]
        tt = np.linspace(t[0], t[-1], n)
        lower = np.column_stack([np.interp(tt, t, orb[:, 1]), np.interp(tt, t, orb[:, 2])])
        return cls(cycle.eta_minus, cycle.eta_plus, float(cycle.s0), np.vstack([slide, lower]))

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def distance(self, xy: np.ndarray) -> np.ndarray:
        return self.tree.query(np.asarray(xy, dtype=float).reshape(-1, 2))[0]

    def hausdorff(self, xy: np.ndarray) -> float:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return float(max(directed_hausdorff(xy, self.points)[0], directed_hausdorff(self.points, xy)[0]))

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_tree"] = None
        return d


# ----------------------------------------------------------------------------
# return map


@dataclass(frozen=True)
class ReturnMapSpec:
    """Section ``{x = 0, sigma1 <= y <= sigma2}`` crossed leftward, at ``(eps, lambda_tilde, c)``."""

    sigma1: float
    sigma2: float
    eps: float
    lambda_tilde: float = 0.0
    c: Optional[tuple] = None
    direction: int = -1

    def __post_init__(self):
        if not self.sigma1 < self.sigma2 < 0:
            raise ValueError("need sigma1 < sigma2 < 0")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def check(self, s0: float) -> None:
        if not self.sigma1 < s0 < self.sigma2:
            raise CycleAssumptionError(f"s0 = {s0:.6g} is not inside the section ({self.sigma1:.6g}, {self.sigma2:.6g})")

    @classmethod
    def around(cls, cycle: SlidingCycle, eps: float, lambda_tilde: float = 0.0, half_width: float = 0.25) -> "ReturnMapSpec":
        s0 = float(cycle.s0)
        w = half_width * abs(s0)
        spec = cls(s0 - w, s0 + w, eps, lambda_tilde, tuple(cycle.c))
        spec.check(s0)
        return spec

    @property
    def ctx(self) -> RegularizedContext:
        return RegularizedContext(self.eps, self.lambda_tilde, self.c)


@dataclass(frozen=True)
class ReturnMapResult:
    y0: float
    P: float
    slope: float
    in_section: bool
    time: float
    max_distance: float
    chart: str
    stats: dict = field(default_factory=dict, repr=False, compare=False)
    orbit: Optional[Orbit] = field(default=None, repr=False, compare=False)

    @property
    def displacement(self) -> float:
        return self.P - self.y0


def return_map(
    model: PwsModel,
    reg: Regularization,
    spec: ReturnMapSpec,
    y0: float,
    geometry: Optional[CycleGeometry] = None,
    tol: Tolerances = DEFAULT,
    chart: str = "original",
    keep_orbit: bool = False,
    backend: Optional[str] = None,
) -> ReturnMapResult:
    """First return of the orbit through ``(0, y0)`` to ``x = 0`` with matching orientation.

    The slope follows from Liouville's formula for planar flows,
    ``P'(y0) = X(0, y0) / X(0, P) * exp(int div dt)``, with the divergence
    integral carried along by the integrator.  With ``geometry`` given the
    orbit must stay within ``tol.delta`` of the sliding cycle.
    """
    ctx = spec.ctx
    delta = tol.delta
    events = [Event(0, 0.0, spec.direction, -math.inf, 0.0)]
    if geometry is not None:
        # leaving the delta-box around the cycle ends the integration early
        events += [
            Event(0, geometry.eta_plus + delta, 1),
            Event(0, geometry.eta_minus - delta, -1),
            Event(1, delta, 1),
        ]
    orbit = integrate(model, reg, ctx, (0.0, y0), tol.t_budget / spec.eps**2, events, tol, chart, backend=backend)
    xy = np.column_stack([orbit.x, orbit.y])
    dmax = float(np.max(geometry.distance(xy))) if geometry is not None else math.nan
    if orbit.status == STATUS_NAMES[ESCAPED] or (orbit.status == "event" and orbit.event_index > 0):
        raise LeftNeighborhood(f"orbit from (0, {y0:.10g}) left the cycle neighborhood (delta = {delta})")
    if orbit.status != "event":
        raise IntegrationTimeout(f"no return from (0, {y0:.10g}) within {tol.t_budget}/eps^2 (status {orbit.status})")
    if geometry is not None and dmax > delta:
        raise LeftNeighborhood(f"orbit from (0, {y0:.10g}) strays {dmax:.3g} > delta = {delta} from the cycle")
    P = float(orbit.y[-1])
    sysm = System(model, reg, ctx)
    X0 = sysm.rhs(0.0, y0)[0]
    X1 = sysm.rhs(0.0, P)[0]
    slope = float(X0 / X1 * math.exp(orbit.D[-1])) if orbit.D[-1] < 700 else math.inf
    return ReturnMapResult(
        float(y0),
        P,
        slope,
        bool(spec.sigma1 <= P <= spec.sigma2),
        float(orbit.t[-1]),
        dmax,
        chart,
        orbit.stats,
        orbit if keep_orbit else None,
    )


def cross_validate_landing(
    model: PwsModel,
    reg: Regularization,
    spec: ReturnMapSpec,
    y0: float,
    geometry: Optional[CycleGeometry] = None,
    tol: Tolerances = DEFAULT,
    threshold: float = 1e-6,
) -> tuple:
    """Return-map value from the original and the family chart; raise when they disagree."""
    a = return_map(model, reg, spec, y0, geometry, tol, "original")
    b = return_map(model, reg, spec, y0, geometry, tol, "family")
    if abs(a.P - b.P) > threshold * max(1.0, abs(a.P)):
        raise ChartDisagreement(f"section landings differ by {abs(a.P - b.P):.3e} at y0 = {y0:.12g}")
    return a, b


# ----------------------------------------------------------------------------
# counting


@dataclass(frozen=True)
class FixedPoint:
    y: float
    slope: float
    classification: str  # attracting | repelling | non-hyperbolic
    residual: float  # |P(y) - y|
    periodicity: float  # |P(P(y)) - y|
    hausdorff: float
    chart_agreement: Optional[float] = None


@dataclass
class LimitCycleReport:
    eps: float
    lambda_tilde: float
    fixed_points: list
    samples: list  # (y0, P or nan, slope or nan, status)
    diagnostics: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.fixed_points)

    @property
    def returns(self) -> int:
        return sum(1 for s in self.samples if s[3] == "return")


def _sample(model, reg, spec, y, geometry, tol, chart, backend):
    try:
        r = return_map(model, reg, spec, y, geometry, tol, chart, backend=backend)
        return (float(y), r.P, r.slope, "return")
    except LeftNeighborhood:
        return (float(y), math.nan, math.nan, "left-neighborhood")
    except IntegrationTimeout:
        return (float(y), math.nan, math.nan, "timeout")


def _sign_changes(samples) -> list:
    out = []
    for a, b in zip(samples, samples[1:]):
        if a[3] == b[3] == "return":
            da, db = a[1] - a[0], b[1] - b[0]
            if da == 0.0:
                out.append((a[0], a[0]))
            elif da * db < 0:
                out.append((a[0], b[0]))
    if samples and samples[-1][3] == "return" and samples[-1][1] == samples[-1][0]:
        out.append((samples[-1][0], samples[-1][0]))
    return out


def count_limit_cycles(
    model: PwsModel,
    reg: Regularization,
    spec: ReturnMapSpec,
    grid: int | Sequence[float] = 64,
    geometry: Optional[CycleGeometry] = None,
    tol: Tolerances = DEFAULT,
    chart: str = "original",
    refine: bool = True,
    cross_validate: bool = True,
    backend: Optional[str] = None,
) -> LimitCycleReport:
    """Fixed points of the return map on the section by sign changes of ``P(y) - y``.

    Each bracket is solved to ``1e-10`` in ``y``; fixed points are checked for
    residual, periodicity after a second return, Hausdorff closeness to the
    cycle and (optionally) agreement between the two integration charts.
    With ``refine`` the midpoint of every cell next to a sign change or a local
    minimum of ``|P(y) - y|`` is sampled as well; a changed sign-change count
    raises :class:`GridRefinementRequired`.
    """
    ys = np.linspace(spec.sigma1, spec.sigma2, grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    samples = [_sample(model, reg, spec, y, geometry, tol, chart, backend) for y in ys]
    brackets = _sign_changes(samples)
    diagnostics = []
    if refine:
        disp = np.array([s[1] - s[0] if s[3] == "return" else np.nan for s in samples])
        cells = set()
        for a, b in brackets:
            i = int(np.argmin(np.abs(ys - a)))
            cells.add(min(i, len(ys) - 2))
        ad = np.abs(disp)
        for i in range(1, len(ys) - 1):
            if np.isfinite(ad[i - 1 : i + 2]).all() and ad[i] <= ad[i - 1] and ad[i] <= ad[i + 1]:
                cells.update((i - 1, i))
        extra = [_sample(model, reg, spec, 0.5 * (ys[i] + ys[i + 1]), geometry, tol, chart, backend) for i in sorted(cells)]
        merged = sorted(samples + extra, key=lambda s: s[0])
        fine = _sign_changes(merged)
        if len(fine) != len(brackets):
            raise GridRefinementRequired(
                f"sign changes {len(brackets)} on the grid but {len(fine)} after refinement at eps={spec.eps}, "
                f"lambda~={spec.lambda_tilde}; use a finer grid"
            )
        samples, brackets = merged, fine

    def disp_at(y):
        return return_map(model, reg, spec, y, geometry, tol, chart, backend=backend).displacement

    fps = []
    for a, b in brackets:
        y = a if a == b else brentq(disp_at, a, b, xtol=1e-10, rtol=4 * np.finfo(float).eps, maxiter=200)
        r = return_map(model, reg, spec, y, geometry, tol, chart, keep_orbit=True, backend=backend)
        residual = abs(r.P - y)
        if residual >= 1e-9:
            diagnostics.append(f"fixed point near y={y:.12g} has residual {residual:.3e}")
        r2 = return_map(model, reg, spec, r.P, geometry, tol, chart, backend=backend)
        hd = geometry.hausdorff(np.column_stack([r.orbit.x, r.orbit.y])) if geometry is not None else math.nan
        if geometry is not None and hd > tol.delta:
            diagnostics.append(f"cycle through y={y:.12g} is {hd:.3g} from the sliding cycle (> delta)")
        agree = None
        if cross_validate:
            other = "family" if chart == "original" else "original"
            ro = return_map(model, reg, spec, y, geometry, tol, other, backend=backend)
            agree = abs(ro.P - r.P)
            if agree > 1e-6 * max(1.0, abs(r.P)):
                raise ChartDisagreement(f"charts disagree by {agree:.3e} at the fixed point y={y:.12g}")
        cls = "attracting" if r.slope < 1 else ("repelling" if r.slope > 1 else "non-hyperbolic")
        fps.append(FixedPoint(float(y), float(r.slope), cls, float(residual), float(abs(r2.P - y)), hd, agree))
    if not any(s[3] == "return" for s in samples):
        diagnostics.append("no orbit returned to the section; all left the cycle neighborhood or timed out")
    return LimitCycleReport(spec.eps, spec.lambda_tilde, fps, samples, diagnostics)


# ----------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepJob:
    model: PwsModel
    reg: Regularization
    spec: ReturnMapSpec
    geometry: Optional[CycleGeometry]
    tol: Tolerances
    grid: int
    chart: str
    refine: bool
    cross_validate: bool


def _run_job(job: SweepJob):
    try:
        return count_limit_cycles(
            job.model, job.reg, job.spec, job.grid, job.geometry, job.tol, job.chart, job.refine, job.cross_validate
        )
    except NumericalError as exc:
        return LimitCycleReport(job.spec.eps, job.spec.lambda_tilde, [], [], [f"{type(exc).__name__}: {exc}"])


def sweep(
    model: PwsModel,
    reg: Regularization,
    cycle: SlidingCycle,
    eps_grid: Sequence[float],
    lambda_grid: Sequence[float],
    grid: int = 64,
    tol: Tolerances = DEFAULT,
    jobs: int = 1,
    chart: str = "original",
    refine: bool = True,
    cross_validate: bool = True,
    half_width: float = 0.25,
) -> list:
    """Limit-cycle counts over an ``(eps, lambda_tilde)`` grid; jobs are independent and run in processes."""
    geom = CycleGeometry.from_cycle(cycle)
    work = [
        SweepJob(model, reg, ReturnMapSpec.around(cycle, e, lt, half_width), geom, tol, grid, chart, refine, cross_validate)
        for e in eps_grid
        for lt in lambda_grid
    ]
    if jobs <= 1:
        return [_run_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, work))
