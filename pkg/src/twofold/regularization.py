"""Regularization functions ``phi``: monotone transitions from 0 to 1.

Two closed-form families are built in.  Both have ``phi(0) = 1/2`` and are
smooth at infinity in the sense that ``s -> phi(1/s)`` and ``s -> phi(-1/s)``
extend smoothly to ``s = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FAMILIES = ("arctan", "algebraic")

# integer codes shared with the compiled kernel
FAMILY_CODES = {"arctan": 0, "algebraic": 1}


def _arctan_phi(s):
    return 0.5 + np.arctan(s) / np.pi


def _arctan_dphi(s):
    return 1.0 / (np.pi * (1.0 + s * s))


def _arctan_inv(u):
    return np.tan(np.pi * (u - 0.5))


def _arctan_phi_minus(s):
    # phi(-1/s) for s > 0, extended by 0 at s = 0
    return np.arctan(s) / np.pi


def _arctan_phi_plus(s):
    return 1.0 - np.arctan(s) / np.pi


def _algebraic_phi(s):
    return 0.5 + s / (2.0 * np.sqrt(1.0 + s * s))


def _algebraic_dphi(s):
    return 0.5 / (1.0 + s * s) ** 1.5


def _algebraic_inv(u):
    v = 2.0 * u - 1.0
    return v / np.sqrt(1.0 - v * v)


def _algebraic_phi_minus(s):
    return 0.5 - 0.5 / np.sqrt(1.0 + s * s)


def _algebraic_phi_plus(s):
    return 0.5 + 0.5 / np.sqrt(1.0 + s * s)


_BUILTIN = {
    "arctan": (_arctan_phi, _arctan_dphi, _arctan_inv, _arctan_phi_minus, _arctan_phi_plus),
    "algebraic": (
        _algebraic_phi,
        _algebraic_dphi,
        _algebraic_inv,
        _algebraic_phi_minus,
        _algebraic_phi_plus,
    ),
}


@dataclass(frozen=True)
class Regularization:
    """A regularization function with derivative and inverse.

    Use :meth:`builtin` for the shipped families or pass a user triple
    ``(phi, phi_prime, phi_inv)``; user callables must be picklable (module
    level) if sweeps are run with several jobs.
    """

    family: str
    _phi: Callable = field(repr=False)
    _dphi: Callable = field(repr=False)
    _inv: Callable = field(repr=False)
    _phi_minus: Optional[Callable] = field(default=None, repr=False)
    _phi_plus: Optional[Callable] = field(default=None, repr=False)

    @classmethod
    def builtin(cls, name: str) -> "Regularization":
        try:
            funcs = _BUILTIN[name]
        except KeyError:
            raise ValueError(f"unknown regularization family {name!r}; choose from {FAMILIES}")
        return cls(name, *funcs)

    @classmethod
    def custom(cls, phi, phi_prime, phi_inv, name: str = "custom") -> "Regularization":
        return cls(name, phi, phi_prime, phi_inv)

    @property
    def code(self) -> int:
        """Kernel family code, or -1 when only the Python path can evaluate it."""
        return FAMILY_CODES.get(self.family, -1)

    def phi(self, s):
        return self._phi(s)

    def phi_prime(self, s):
        return self._dphi(s)

    def phi_inv(self, u):
        return self._inv(u)

    def phi_minus(self, s):
        """``phi(-1/s)`` for ``s > 0`` and its limit 0 at ``s = 0``."""
        if self._phi_minus is not None:
            return self._phi_minus(s)
        s = float(s)
        return 0.0 if s == 0.0 else float(self._phi(-1.0 / s))

    def phi_plus(self, s):
        """``phi(1/s)`` for ``s > 0`` and its limit 1 at ``s = 0``."""
        if self._phi_plus is not None:
            return self._phi_plus(s)
        s = float(s)
        return 1.0 if s == 0.0 else float(self._phi(1.0 / s))

    def saturated(self, s: float, s_max: float) -> tuple[float, float]:
        """``(phi, phi')`` at ``s`` with the tail replaced by exact 0/1 beyond ``s_max``."""
        if s > s_max:
            return 1.0, 0.0
        if s < -s_max:
            return 0.0, 0.0
        return float(self._phi(s)), float(self._dphi(s))


ARCTAN = Regularization.builtin("arctan")
ALGEBRAIC = Regularization.builtin("algebraic")


def check_contract(reg: Regularization, s_extent: float = 1e6, n: int = 400) -> dict:
    """Numerically check monotonicity, limits, inversion and smoothness at infinity.

    Returns a dict of named booleans plus the measured worst values; nothing
    raises here, the caller decides what to do with a failed check.
    """
    pos = np.geomspace(1e-6, s_extent, n)
    grid = np.concatenate([-pos[::-1], [0.0], pos])
    dphi = np.asarray(reg.phi_prime(grid), dtype=float)
    monotone = bool(np.all(dphi > 0.0) or _positive_where_representable(reg, grid, dphi))
    lim_hi = float(reg.phi(s_extent))
    lim_lo = float(reg.phi(-s_extent))
    u = np.linspace(1e-3, 1.0 - 1e-3, 999)
    inv_err = float(np.max(np.abs(reg.phi(reg.phi_inv(u)) - u)))

    # divided differences of s -> phi(+-1/s) near 0 must stay bounded
    worst_dd = 0.0
    for sgn in (1.0, -1.0):
        f = reg.phi_plus if sgn > 0 else reg.phi_minus
        for h in (1e-2, 5e-3, 2.5e-3):
            nodes = np.array([k * h for k in range(5)])
            vals = np.array([float(f(t)) for t in nodes])
            for order in range(1, 5):
                dd = np.diff(vals, n=order) / (math.factorial(order) * h**order)
                worst_dd = max(worst_dd, float(np.max(np.abs(dd))))
    return {
        "monotone": monotone,
        "limit_plus": abs(1.0 - lim_hi) < 1e-5,
        "limit_minus": abs(lim_lo) < 1e-5,
        "inverse": inv_err < 1e-12,
        "smooth_at_infinity": worst_dd < 1e3,
        "inverse_error": inv_err,
        "max_divided_difference": worst_dd,
    }


def _positive_where_representable(reg, grid, dphi) -> bool:
    # phi' underflows to 0.0 far in the tail for some families; accept that
    # only where phi itself is already saturated to its limit in float64
    bad = dphi <= 0.0
    if not np.any(bad):
        return True
    phis = np.asarray(reg.phi(grid[bad]), dtype=float)
    return bool(np.all((phis == 0.0) | (phis == 1.0)))
