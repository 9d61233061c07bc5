"""Loading analysis configurations from TOML or JSON files.

Layout::

    name = "example"
    [upper.X]            # monomial "i,j" -> number or expression
    "0,0" = "b"
    [upper.Y]
    "1,0" = 1.0
    [lower.X] / [lower.Y]
    [regularization]
    family = "arctan"    # or "algebraic"
    [context]
    eps = 0.05
    lambda_tilde = 0.0
    c = { b = 2.0 }      # parameter names and their values c0
    [cycle]
    eta_plus = 1.0
    [simulation]         # optional
    eps_grid = [0.1, 0.05]
    lambda_grid = [-0.1, 0.0, 0.1]
    grid = 64
    [tolerances]         # optional overrides of Tolerances fields

A ``[pwl]`` table with the seven canonical coefficients may replace
``[upper]``/``[lower]``/``c``.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .model import PolynomialField, PwsModel, RegularizedContext
from .pwl import PwlCoefficients, build_pwl
from .regularization import Regularization
from .tolerances import DEFAULT, Tolerances

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_SECTIONS = {"name", "upper", "lower", "pwl", "regularization", "context", "cycle", "simulation", "tolerances"}


@dataclass(frozen=True)
class SimulationConfig:
    eps_grid: tuple = (0.1, 0.05)
    lambda_grid: tuple = tuple(round(-0.2 + 0.05 * i, 10) for i in range(9))
    grid: int = 64
    half_width: float = 0.25
    chart: str = "original"


@dataclass(frozen=True)
class AnalysisConfig:
    name: str
    model: PwsModel
    reg: Regularization
    ctx: RegularizedContext
    eta_plus: float
    simulation: SimulationConfig = SimulationConfig()
    tolerances: Tolerances = DEFAULT
    pwl: Optional[PwlCoefficients] = None
    source: dict = field(default_factory=dict, repr=False)

    def echo(self) -> dict:
        """Self-contained configuration that reproduces this analysis."""
        out = {"name": self.name}
        if self.pwl is not None:
            out["pwl"] = self.pwl.as_dict()
        else:
            out["upper"] = self.model.upper.to_config()
            out["lower"] = self.model.lower.to_config()
        out["regularization"] = {"family": self.reg.family}
        out["context"] = {"eps": self.ctx.eps, "lambda_tilde": self.ctx.lambda_tilde}
        if self.pwl is None:
            out["context"]["c"] = dict(zip(self.model.param_names, self.model.resolve_c(self.ctx.c)))
        out["cycle"] = {"eta_plus": self.eta_plus}
        s = self.simulation
        out["simulation"] = {
            "eps_grid": list(s.eps_grid),
            "lambda_grid": list(s.lambda_grid),
            "grid": s.grid,
            "half_width": s.half_width,
            "chart": s.chart,
        }
        out["tolerances"] = self.tolerances.to_dict()
        return out


def _num(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    return float(v)


def _field(sec, what: str) -> PolynomialField:
    if not isinstance(sec, dict) or set(sec) - {"X", "Y"} or not {"X", "Y"} <= set(sec):
        raise ConfigError(f"[{what}] needs exactly the tables X and Y")
    for k in ("X", "Y"):
        if not isinstance(sec[k], dict):
            raise ConfigError(f"[{what}.{k}] must be a table of monomial coefficients")
    return PolynomialField(X=sec["X"], Y=sec["Y"])


def _floats(v, what: str) -> tuple:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{what} must be a non-empty list of numbers")
    return tuple(_num(x, what) for x in v)


def parse_config(data: dict, tolerances: Optional[dict] = None) -> AnalysisConfig:
    """Validate a parsed configuration mapping; every problem raises :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")
    name = str(data.get("name", "model"))

    ctx_sec = data.get("context", {})
    if not isinstance(ctx_sec, dict) or set(ctx_sec) - {"eps", "lambda_tilde", "c"}:
        raise ConfigError("[context] accepts eps, lambda_tilde and c")
    eps = _num(ctx_sec.get("eps", 0.05), "context.eps")
    lt = _num(ctx_sec.get("lambda_tilde", 0.0), "context.lambda_tilde")
    if eps < 0:
        raise ConfigError("context.eps must be non-negative")

    coeffs = None
    if "pwl" in data:
        if "upper" in data or "lower" in data:
            raise ConfigError("give either [pwl] or [upper]/[lower], not both")
        if not isinstance(data["pwl"], dict):
            raise ConfigError("[pwl] must be a table")
        coeffs = PwlCoefficients.from_mapping({k: _num(v, f"pwl.{k}") for k, v in data["pwl"].items()})
        # admissibility is a modeling assumption, checked by the pipeline
        model = build_pwl(coeffs, check=False, name=name)
        if "c" in ctx_sec:
            raise ConfigError("context.c is implied by [pwl]")
        c = model.c0
    else:
        if "upper" not in data or "lower" not in data:
            raise ConfigError("missing [upper] or [lower]")
        params = ctx_sec.get("c", {})
        if not isinstance(params, dict):
            raise ConfigError("context.c must be a table of parameter values")
        names = tuple(params)
        c = tuple(_num(params[n], f"context.c.{n}") for n in names)
        try:
            model = PwsModel(_field(data["upper"], "upper"), _field(data["lower"], "lower"), names, c, name)
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(str(exc)) from None

    reg_sec = data.get("regularization", {"family": "arctan"})
    if not isinstance(reg_sec, dict) or set(reg_sec) - {"family"}:
        raise ConfigError("[regularization] accepts only family")
    try:
        reg = Regularization.builtin(str(reg_sec.get("family", "arctan")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cyc = data.get("cycle")
    if not isinstance(cyc, dict) or set(cyc) != {"eta_plus"}:
        raise ConfigError("[cycle] must give eta_plus")
    eta_plus = _num(cyc["eta_plus"], "cycle.eta_plus")
    if not eta_plus > 0:
        raise ConfigError("cycle.eta_plus must be positive")

    sim_sec = data.get("simulation", {})
    allowed = {"eps_grid", "lambda_grid", "grid", "half_width", "chart"}
    if not isinstance(sim_sec, dict) or set(sim_sec) - allowed:
        raise ConfigError(f"[simulation] accepts {sorted(allowed)}")
    sim = SimulationConfig()
    kw = {}
    if "eps_grid" in sim_sec:
        kw["eps_grid"] = _floats(sim_sec["eps_grid"], "simulation.eps_grid")
        if min(kw["eps_grid"]) <= 0:
            raise ConfigError("simulation.eps_grid entries must be positive")
    if "lambda_grid" in sim_sec:
        kw["lambda_grid"] = _floats(sim_sec["lambda_grid"], "simulation.lambda_grid")
    if "grid" in sim_sec:
        g = sim_sec["grid"]
        if isinstance(g, bool) or not isinstance(g, int) or g < 2:
            raise ConfigError("simulation.grid must be an integer >= 2")
        kw["grid"] = g
    if "half_width" in sim_sec:
        kw["half_width"] = _num(sim_sec["half_width"], "simulation.half_width")
        if not 0 < kw["half_width"] < 1:
            raise ConfigError("simulation.half_width must lie in (0, 1)")
    if "chart" in sim_sec:
        if sim_sec["chart"] not in ("original", "family"):
            raise ConfigError("simulation.chart must be 'original' or 'family'")
        kw["chart"] = sim_sec["chart"]
    sim = SimulationConfig(**{**sim.__dict__, **kw})

    tol_data = dict(data.get("tolerances", {}))
    tol_data.update(tolerances or {})
    for k, v in tol_data.items():
        if isinstance(v, str) and v in ("inf", "-inf"):
            tol_data[k] = float(v)  # JSON has no infinity literal
    try:
        tol = Tolerances.from_dict(tol_data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"tolerances: {exc}") from None

    return AnalysisConfig(name, model, reg, RegularizedContext(eps, lt, c), eta_plus, sim, tol, coeffs, data)


def read_table(path) -> dict:
    """Parse a TOML (``.toml``) or JSON file into a mapping."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None
    try:
        if p.suffix == ".json":
            return json.loads(raw)
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{p}: {exc}") from None


def load_config(path, tolerances_path=None) -> AnalysisConfig:
    tol = read_table(tolerances_path) if tolerances_path is not None else None
    if tol is not None and "tolerances" in tol and isinstance(tol["tolerances"], dict):
        tol = tol["tolerances"]
    return parse_config(read_table(path), tol)
