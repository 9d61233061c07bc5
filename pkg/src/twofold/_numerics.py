"""Small numerical helpers shared by several modules."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


def central_difference(f, x0: float, k: int, h: float) -> float:
    """Central difference estimate of ``f^(k)(x0)`` with error ``O(h^2)``."""
    if k == 0:
        return float(f(x0))
    total = 0.0
    for i in range(k + 1):
        total += (-1) ** i * comb(k, i) * float(f(x0 + (k / 2.0 - i) * h))
    return total / h**k


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    error: float
    reliable: bool


def richardson_derivative(f, x0: float, k: int, h0: float | None = None, levels: int = 5) -> DerivativeEstimate:
    """Richardson-extrapolated central difference of order ``k``.

    The step halves at each level and the ``h^2`` error series is eliminated
    column by column.  ``reliable`` is false when the diagonal of the tableau
    stops converging, which happens when rounding noise dominates.
    """
    if k == 0:
        v = float(f(x0))
        return DerivativeEstimate(v, 0.0, True)
    if h0 is None:
        # larger base step for higher orders keeps roundoff (~eps/h^k) in check
        h0 = max(1.0, abs(x0)) * (0.05 if k <= 2 else 0.1)
    T = np.zeros((levels, levels))
    for j in range(levels):
        T[j, 0] = central_difference(f, x0, k, h0 / 2**j)
        for m in range(1, j + 1):
            fac = 4.0**m
            T[j, m] = T[j, m - 1] + (T[j, m - 1] - T[j - 1, m - 1]) / (fac - 1.0)
    diag = np.array([T[j, j] for j in range(levels)])
    steps = np.abs(np.diff(diag))
    err = float(steps[-1]) if len(steps) else 0.0
    scale = max(1.0, float(np.max(np.abs(diag))))
    # the corrections should shrink; a growing tail signals noise
    reliable = bool(len(steps) < 2 or steps[-1] <= max(steps[-2], 1e-9 * scale))
    return DerivativeEstimate(float(diag[-1]), err, reliable)


def newton_polish(f, df, x0: float, lo: float, hi: float, tol: float = 1e-15, maxiter: int = 200) -> float | None:
    """Newton iteration kept inside ``[lo, hi]``; returns ``None`` when it wanders off or stalls."""
    x = float(x0)
    for _ in range(maxiter):
        fx = f(x)
        dfx = df(x)
        if fx == 0.0:
            return x
        if dfx == 0.0 or not np.isfinite(dfx):
            return None
        step = fx / dfx
        x_new = x - step
        if not (lo <= x_new <= hi) or not np.isfinite(x_new):
            return None
        if abs(x_new - x) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x
