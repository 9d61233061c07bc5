"""Backend selection for the trajectory integrator.

The compiled extension ``twofold._kernels`` is used when it imports and the
system is a polynomial model with a built-in regularization family; the pure
Python reference in ``twofold._integrator`` covers everything else (callback
fields, user-supplied ``phi``) and serves as the fallback when the extension
was not built.  Set ``TWOFOLD_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _integrator as _py
from .errors import StiffnessFailure
from .model import PwsModel, RegularizedContext, regularized_field
from .regularization import Regularization
from .tolerances import DEFAULT, Tolerances

try:  # pragma: no cover - depends on the build
    from . import _kernels as _cy
except ImportError:  # pragma: no cover
    _cy = None

MODE_ORIGINAL = _py.MODE_ORIGINAL
MODE_FAMILY = _py.MODE_FAMILY
EVENT, T_END, ESCAPED, UNDERFLOW, MAX_STEPS, NONFINITE = (
    _py.EVENT,
    _py.T_END,
    _py.ESCAPED,
    _py.UNDERFLOW,
    _py.MAX_STEPS,
    _py.NONFINITE,
)
STATUS_NAMES = {
    EVENT: "event",
    T_END: "t_end",
    ESCAPED: "escaped",
    UNDERFLOW: "underflow",
    MAX_STEPS: "max_steps",
    NONFINITE: "nonfinite",
}


def compiled_available() -> bool:
    return _cy is not None and os.environ.get("TWOFOLD_BACKEND", "").lower() != "python"


def pack_fields(upper, lower):
    """Flatten two baked polynomial fields into ``(exps, coefs, offsets)``."""
    parts = [
        (upper.x_exps, upper.x_coefs),
        (upper.y_exps, upper.y_coefs),
        (lower.x_exps, lower.x_coefs),
        (lower.y_exps, lower.y_coefs),
    ]
    exps = np.ascontiguousarray(np.vstack([p[0] for p in parts]), dtype=np.int64)
    coefs = np.ascontiguousarray(np.concatenate([p[1] for p in parts]), dtype=np.float64)
    offsets = np.zeros(5, dtype=np.int64)
    offsets[1:] = np.cumsum([len(p[1]) for p in parts])
    return exps, coefs, offsets


@dataclass(frozen=True)
class System:
    """A regularized system ready for integration in a given chart and time direction."""

    model: PwsModel
    reg: Regularization
    ctx: RegularizedContext
    mode: int = MODE_ORIGINAL
    direction: float = 1.0
    s_max: float = DEFAULT.sim_s_max
    backend: Optional[str] = None  # None = automatic, "python" or "compiled"
    _packed: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        up, lo = self.model.fields(self.ctx.lam, self.ctx.c)
        packed = None
        if up.is_polynomial and lo.is_polynomial and self.reg.code >= 0:
            packed = pack_fields(up, lo)
        object.__setattr__(self, "_packed", (up, lo, packed))

    @property
    def eps(self) -> float:
        return self.ctx.eps

    def resolved_backend(self) -> str:
        packed = self._packed[2]
        if self.backend == "python" or packed is None:
            return "python"
        if self.backend == "compiled":
            if _cy is None:
                raise RuntimeError("compiled kernel requested but twofold._kernels is not built")
            return "compiled"
        return "compiled" if compiled_available() else "python"

    def python_system(self):
        packed = self._packed[2]
        if packed is not None:
            exps, coefs, offsets = packed
            return _py.PolySystem(exps, coefs, offsets, self.ctx.eps, self.reg.code, self.s_max, self.mode, self.direction)
        fld = regularized_field(self.model, self.reg, self.ctx, self.s_max)
        return _py.FieldSystem(fld, self.mode, self.direction)

    def rhs(self, x: float, y: float):
        """``(dx, dy, div)`` in the system's chart and direction."""
        if self.resolved_backend() == "compiled":
            exps, coefs, offsets = self._packed[2]
            return tuple(
                _cy.rhs(exps, coefs, offsets, self.ctx.eps, self.reg.code, self.s_max, self.mode, self.direction, x, y)
            )
        return self.python_system().rhs(x, y)

    def jac(self, x: float, y: float):
        if self.resolved_backend() == "compiled":
            exps, coefs, offsets = self._packed[2]
            return tuple(
                _cy.jac(exps, coefs, offsets, self.ctx.eps, self.reg.code, self.s_max, self.mode, self.direction, x, y)
            )
        return self.python_system().jac(x, y)

    def with_direction(self, direction: float) -> "System":
        return System(self.model, self.reg, self.ctx, self.mode, direction, self.s_max, self.backend)

    def with_mode(self, mode: int) -> "System":
        return System(self.model, self.reg, self.ctx, mode, self.direction, self.s_max, self.backend)


@dataclass(frozen=True)
class Event:
    """Crossing of ``u[coord] == value`` in ``direction`` with the other coordinate in ``[lo, hi]``."""

    coord: int
    value: float
    direction: int = 0
    lo: float = -np.inf
    hi: float = np.inf

    def row(self):
        return (float(self.coord), float(self.value), float(self.direction), float(self.lo), float(self.hi))


@dataclass
class Solution:
    status: int
    t: float
    u: np.ndarray
    event_index: int
    trajectory: Optional[np.ndarray]
    stats: dict

    @property
    def status_name(self) -> str:
        return STATUS_NAMES[self.status]

    @property
    def x(self) -> float:
        return float(self.u[0])

    @property
    def y(self) -> float:
        return float(self.u[1])

    @property
    def D(self) -> float:
        return float(self.u[2])


def integrate(
    system: System,
    z0: Sequence[float],
    t_span: float,
    events: Sequence[Event] = (),
    tol: Tolerances = DEFAULT,
    record: bool = False,
    h0: float = 0.0,
    stiff_threshold: float = 0.0,
    max_steps: int = 2_000_000,
    raise_on_underflow: bool = True,
    D0: float = 0.0,
) -> Solution:
    """Integrate from ``z0`` over at most ``t_span`` time units.

    ``stiff_threshold > 0`` additionally forces the implicit stepper wherever
    the local spectral radius exceeds it; by default switching is driven by
    the product of spectral radius and step size alone.
    """
    u0 = np.array([float(z0[0]), float(z0[1]), float(D0)])
    rows = np.array([e.row() for e in events], dtype=float).reshape(-1, 5)
    opts = {
        "rtol": tol.sim_rtol,
        "atol": tol.sim_atol,
        "event_tol": tol.event_tol,
        "box": tol.box,
        "stiff_threshold": float(stiff_threshold),
        "h_min": 1e-14,
        "max_steps": int(max_steps),
        "record": bool(record),
    }
    if system.resolved_backend() == "compiled":
        exps, coefs, offsets = system._packed[2]
        status, t, u, ev, traj, st = _cy.integrate(
            exps,
            coefs,
            offsets,
            system.ctx.eps,
            system.reg.code,
            system.s_max,
            system.mode,
            system.direction,
            u0,
            0.0,
            float(t_span),
            float(h0),
            rows,
            opts["rtol"],
            opts["atol"],
            opts["event_tol"],
            opts["box"],
            opts["stiff_threshold"],
            opts["h_min"],
            opts["max_steps"],
            int(record),
        )
        stats = {"steps": int(st[0]), "rejected": int(st[1]), "implicit_steps": int(st[2]), "backend": "compiled"}
        traj = np.asarray(traj) if record else None
    else:
        status, t, u, ev, traj, stats = _py.integrate(
            system.python_system(), u0, 0.0, float(t_span), float(h0), [tuple(r) for r in rows], opts
        )
        stats = dict(stats, backend="python")
        traj = np.array(traj, dtype=float).reshape(-1, 4) if record else None
    sol = Solution(int(status), float(t), np.asarray(u, dtype=float), int(ev), traj, stats)
    if status == UNDERFLOW and raise_on_underflow:
        raise StiffnessFailure(
            f"step size underflow at t={t:.6g}, state=({u[0]:.6g}, {u[1]:.6g})", t=float(t), state=np.asarray(u)
        )
    return sol
