"""Piecewise-smooth planar systems and their regularization.

A system is a pair of smooth fields ``Z+ = (X+, Y+)`` (used above the
switching line ``y = 0``) and ``Z- = (X-, Y-)`` (below), depending on a
small parameter ``lam`` and a named parameter vector ``c``.  The regularized
field blends them with ``phi(y / eps^2)`` and ``lam = eps * lambda_tilde``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError
from .expressions import Expr
from .regularization import Regularization
from .tolerances import DEFAULT

Coef = Union[float, Expr]


def _as_coef(v) -> Coef:
    if isinstance(v, Expr):
        return v
    if isinstance(v, str):
        return Expr(v)
    if isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool):
        return float(v)
    raise ConfigError(f"coefficient must be a number or expression string, got {v!r}")


def _as_table(table: Mapping) -> dict:
    out = {}
    for key, v in table.items():
        if isinstance(key, str):
            try:
                i, j = (int(p) for p in key.split(","))
            except ValueError:
                raise ConfigError(f"monomial key must look like 'i,j', got {key!r}") from None
        else:
            i, j = (int(p) for p in key)
        if i < 0 or j < 0:
            raise ConfigError(f"negative exponent in monomial {key!r}")
        out[(i, j)] = _as_coef(v)
    return out


# ----------------------------------------------------------------------------
# baked (parameter-free) fields


@dataclass(frozen=True, eq=False)
class BakedPolynomial:
    """A planar polynomial field with numeric coefficients.

    ``exps[k]`` is an ``(n_k, 2)`` integer array of monomial exponents and
    ``coefs[k]`` the matching coefficients, for ``k = 0`` (X) and ``1`` (Y).
    """

    x_exps: np.ndarray
    x_coefs: np.ndarray
    y_exps: np.ndarray
    y_coefs: np.ndarray
    is_polynomial = True

    @staticmethod
    def _poly(exps, coefs, x, y):
        out = 0.0
        for (i, j), a in zip(exps, coefs):
            out = out + a * x**i * y**j
        return out

    @staticmethod
    def _dpoly(exps, coefs, x, y):
        dx = 0.0
        dy = 0.0
        for (i, j), a in zip(exps, coefs):
            if i:
                dx = dx + a * i * x ** (i - 1) * y**j
            if j:
                dy = dy + a * j * x**i * y ** (j - 1)
        return dx, dy

    def value(self, x, y):
        return (
            self._poly(self.x_exps, self.x_coefs, x, y),
            self._poly(self.y_exps, self.y_coefs, x, y),
        )

    def jacobian(self, x, y) -> np.ndarray:
        xx, xy = self._dpoly(self.x_exps, self.x_coefs, x, y)
        yx, yy = self._dpoly(self.y_exps, self.y_coefs, x, y)
        return np.array([[xx, xy], [yx, yy]], dtype=float)

    def line_poly(self, component: int, dy: int = 0) -> np.ndarray:
        """Coefficients (ascending in x) of ``d^dy/dy^dy`` of a component at ``y = 0``."""
        exps = self.x_exps if component == 0 else self.y_exps
        coefs = self.x_coefs if component == 0 else self.y_coefs
        deg = int(exps[:, 0].max()) if len(exps) else 0
        out = np.zeros(deg + 1)
        fact = 1.0
        for k in range(2, dy + 1):
            fact *= k
        for (i, j), a in zip(exps, coefs):
            if j == dy:
                out[i] += a * fact
        return P.polytrim(out) if np.any(out) else np.zeros(1)

    def shifted_y(self, dy: float) -> "BakedPolynomial":
        """Add a constant to the Y component."""
        exps = np.vstack([self.y_exps, [[0, 0]]]).astype(np.int64)
        coefs = np.concatenate([self.y_coefs, [dy]])
        return BakedPolynomial(self.x_exps, self.x_coefs, exps, coefs)


@dataclass(frozen=True, eq=False)
class BakedCallback:
    """A user-evaluated field frozen at one ``(lam, c)``."""

    value_fn: Callable
    jac_fn: Callable
    lam: float
    c: tuple
    y_shift: float = 0.0
    is_polynomial = False

    def value(self, x, y):
        X, Y = self.value_fn(x, y, self.lam, self.c)
        return X, Y + self.y_shift

    def jacobian(self, x, y) -> np.ndarray:
        J = np.asarray(self.jac_fn(x, y, self.lam, self.c), dtype=float)
        return J[:, :2].copy()

    def line_poly(self, component: int, dy: int = 0):
        raise TypeError("callback fields have no polynomial representation")

    def shifted_y(self, dy: float) -> "BakedCallback":
        return BakedCallback(self.value_fn, self.jac_fn, self.lam, self.c, self.y_shift + dy)


# ----------------------------------------------------------------------------
# parameterized fields


@dataclass(frozen=True)
class PolynomialField:
    """Polynomial field with coefficients that may depend on ``lam`` and ``c``.

    ``X`` and ``Y`` map monomial exponents ``(i, j)`` of ``x^i y^j`` (or the
    string ``"i,j"``) to a float or an expression string.
    """

    X: Mapping
    Y: Mapping

    def __post_init__(self):
        object.__setattr__(self, "X", _as_table(self.X))
        object.__setattr__(self, "Y", _as_table(self.Y))

    def names(self) -> set[str]:
        out: set[str] = set()
        for tbl in (self.X, self.Y):
            for v in tbl.values():
                if isinstance(v, Expr):
                    out |= v.names
        return out

    @property
    def uses_lambda(self) -> bool:
        return "lam" in self.names()

    @staticmethod
    def _bake_table(tbl, env):
        items = sorted(tbl.items())
        exps = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, 2)
        coefs = np.array([v(env) if isinstance(v, Expr) else v for _, v in items], dtype=float)
        keep = coefs != 0.0
        if not np.any(keep):
            return np.zeros((1, 2), dtype=np.int64), np.zeros(1)
        return exps[keep], coefs[keep]

    def bake(self, lam: float, names: Sequence[str], c: Sequence[float]) -> BakedPolynomial:
        env = dict(zip(names, map(float, c)))
        env["lam"] = float(lam)
        xe, xc = self._bake_table(self.X, env)
        ye, yc = self._bake_table(self.Y, env)
        return BakedPolynomial(xe, xc, ye, yc)

    def to_config(self) -> dict:
        def enc(tbl):
            return {f"{i},{j}": (v.text if isinstance(v, Expr) else v) for (i, j), v in sorted(tbl.items())}

        return {"X": enc(self.X), "Y": enc(self.Y)}


@dataclass(frozen=True)
class CallbackField:
    """Field given by evaluators.

    ``value(x, y, lam, c) -> (X, Y)`` and ``jacobian(x, y, lam, c)`` returning a
    ``2 x (2 + 1 + len(c))`` array of partials in ``(x, y, lam, c...)``; a
    ``2 x 2`` array (spatial partials only) is also accepted.  The
    ``lam`` dependence is the caller's responsibility.
    """

    value: Callable
    jacobian: Callable
    uses_lambda: bool = True

    def names(self) -> set[str]:
        return set()

    def bake(self, lam: float, names: Sequence[str], c: Sequence[float]) -> BakedCallback:
        return BakedCallback(self.value, self.jacobian, float(lam), tuple(map(float, c)))


SmoothField = Union[PolynomialField, CallbackField]


def check_jacobian_consistency(
    fld: SmoothField,
    names: Sequence[str],
    c: Sequence[float],
    points: np.ndarray,
    lam: float = 0.0,
    h: float = 1e-6,
) -> float:
    """Largest relative mismatch between the supplied Jacobian and central differences."""
    baked = fld.bake(lam, names, c)
    worst = 0.0
    for x, y in np.atleast_2d(points):
        J = baked.jacobian(x, y)
        fd = np.empty((2, 2))
        for col, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
            hi = np.array(baked.value(x + dx, y + dy), dtype=float)
            lo = np.array(baked.value(x - dx, y - dy), dtype=float)
            fd[:, col] = (hi - lo) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(J))))
        worst = max(worst, float(np.max(np.abs(J - fd))) / scale)
    return worst


# ----------------------------------------------------------------------------
# the system


@dataclass(frozen=True)
class PwsModel:
    """Two smooth fields glued along ``y = 0``.

    When neither field refers to ``lam`` the breaking parameter enters
    additively as ``Y+ + lam`` (``lambda_additive``); this is a modeling
    default reported as such, not a structural requirement.
    """

    upper: SmoothField
    lower: SmoothField
    param_names: tuple = ()
    c0: tuple = ()
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "param_names", tuple(self.param_names))
        object.__setattr__(self, "c0", tuple(float(v) for v in self.c0))
        if len(self.param_names) != len(self.c0):
            raise ConfigError("param_names and c0 must have equal length")
        if len(set(self.param_names)) != len(self.param_names):
            raise ConfigError("duplicate parameter names")
        if "lam" in self.param_names:
            raise ConfigError("'lam' is reserved for the breaking parameter")
        known = set(self.param_names) | {"lam"}
        for fld in (self.upper, self.lower):
            unknown = fld.names() - known
            if unknown:
                raise ConfigError(f"expression refers to undefined parameter(s) {sorted(unknown)}")

    @property
    def lambda_additive(self) -> bool:
        return not (self.upper.uses_lambda or self.lower.uses_lambda)

    def resolve_c(self, c=None) -> tuple:
        if c is None:
            return self.c0
        if isinstance(c, Mapping):
            unknown = set(c) - set(self.param_names)
            if unknown:
                raise ConfigError(f"unknown parameter(s) {sorted(unknown)}")
            return tuple(float(c.get(n, v)) for n, v in zip(self.param_names, self.c0))
        c = tuple(float(v) for v in c)
        if len(c) != len(self.c0):
            raise ConfigError(f"expected {len(self.c0)} parameters, got {len(c)}")
        return c

    def fields(self, lam: float = 0.0, c=None):
        """``(Z+, Z-)`` frozen at ``(lam, c)``."""
        cc = self.resolve_c(c)
        up = self.upper.bake(lam, self.param_names, cc)
        lo = self.lower.bake(lam, self.param_names, cc)
        if self.lambda_additive and lam != 0.0:
            up = up.shifted_y(lam)
        return up, lo

    @property
    def is_polynomial(self) -> bool:
        return isinstance(self.upper, PolynomialField) and isinstance(self.lower, PolynomialField)


@dataclass(frozen=True)
class RegularizedContext:
    """Scale ``eps``, breaking parameter ``lambda_tilde`` and parameter vector ``c``.

    ``eps = 0`` is allowed for limit objects; anything that evaluates the
    regularized field requires ``eps > 0``.
    """

    eps: float
    lambda_tilde: float = 0.0
    c: Optional[tuple] = None

    def __post_init__(self):
        if not self.eps >= 0.0:
            raise ValueError("eps must be non-negative")
        if self.c is not None and not isinstance(self.c, Mapping):
            object.__setattr__(self, "c", tuple(float(v) for v in self.c))

    @property
    def lam(self) -> float:
        return self.eps * self.lambda_tilde


@dataclass(frozen=True)
class RegularizedField:
    """The regularized vector field at a fixed context, ready for repeated evaluation."""

    upper: object
    lower: object
    reg: Regularization
    eps: float
    s_max: float = DEFAULT.s_max
    _inv_eps2: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("the regularized field needs eps > 0")
        object.__setattr__(self, "_inv_eps2", 1.0 / (self.eps * self.eps))

    def value(self, x: float, y: float) -> np.ndarray:
        phi, _ = self.reg.saturated(y * self._inv_eps2, self.s_max)
        Xp, Yp = self.upper.value(x, y)
        Xm, Ym = self.lower.value(x, y)
        return np.array([Xp * phi + Xm * (1.0 - phi), Yp * phi + Ym * (1.0 - phi)])

    def jacobian(self, x: float, y: float) -> tuple[np.ndarray, float]:
        phi, dphi = self.reg.saturated(y * self._inv_eps2, self.s_max)
        Jp = self.upper.jacobian(x, y)
        Jm = self.lower.jacobian(x, y)
        J = Jp * phi + Jm * (1.0 - phi)
        if dphi != 0.0:
            Xp, Yp = self.upper.value(x, y)
            Xm, Ym = self.lower.value(x, y)
            k = dphi * self._inv_eps2
            J[0, 1] += (Xp - Xm) * k
            J[1, 1] += (Yp - Ym) * k
        return J, float(J[0, 0] + J[1, 1])


def regularized_field(
    model: PwsModel, reg: Regularization, ctx: RegularizedContext, s_max: float = DEFAULT.s_max
) -> RegularizedField:
    up, lo = model.fields(ctx.lam, ctx.c)
    return RegularizedField(up, lo, reg, ctx.eps, s_max)


def eval_regularized(model, reg, ctx, z, s_max: float = DEFAULT.s_max) -> np.ndarray:
    """``Z+ phi(y/eps^2) + Z- (1 - phi(y/eps^2))`` with ``lam = eps * lambda_tilde``."""
    return regularized_field(model, reg, ctx, s_max).value(float(z[0]), float(z[1]))


def jacobian_regularized(model, reg, ctx, z, s_max: float = DEFAULT.s_max):
    """Exact Jacobian of :func:`eval_regularized` and its trace."""
    return regularized_field(model, reg, ctx, s_max).jacobian(float(z[0]), float(z[1]))
