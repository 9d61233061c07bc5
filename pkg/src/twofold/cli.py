"""Command line pipeline: config -> certificate -> cycle -> integrals -> verdict -> optional sweeps.

Exit codes: 0 success, 1 malformed input, 2 assumption failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import AnalysisConfig, load_config
from .cyclicity import analyze_cycle
from .errors import AssumptionError, ConfigError, InsufficientData, NumericalError, TwofoldError
from .filippov import SwitchingLine, certify_two_fold
from .pwl import portrait, thm_appl_case
from .regularization import Regularization
from .report import SCHEMA_VERSION, to_plain, write_csv, write_json
from .sdi import sdi_curve
from .simulate import CycleGeometry, ReturnMapSpec, return_map, sweep

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 1, 2, 3


def _grid(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty grid")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twofold", description="Cyclicity analysis of a sliding cycle through a two-fold.")
    p.add_argument("--version", action="version", version=f"twofold {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="analyze a model configuration")
    r.add_argument("config", help="model configuration (.toml or .json)")
    r.add_argument("--simulate", action="store_true", help="run return-map sweeps over (eps, lambda_tilde)")
    r.add_argument("--eps-grid", type=_grid, help="comma-separated eps values for the sweep")
    r.add_argument("--lambda-grid", type=_grid, help="comma-separated lambda_tilde values for the sweep")
    r.add_argument("--grid", type=int, help="return-map sample points on the section")
    r.add_argument("--phi", choices=("arctan", "algebraic"), help="override the regularization family")
    r.add_argument("--tolerances", help="TOML/JSON file overriding tolerance fields")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return p


def _apply_overrides(cfg: AnalysisConfig, args) -> AnalysisConfig:
    sim = cfg.simulation
    kw = {}
    if args.eps_grid is not None:
        if min(args.eps_grid) <= 0:
            raise ConfigError("--eps-grid entries must be positive")
        kw["eps_grid"] = args.eps_grid
    if args.lambda_grid is not None:
        kw["lambda_grid"] = args.lambda_grid
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        kw["grid"] = args.grid
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    cfg = dataclasses.replace(cfg, simulation=dataclasses.replace(sim, **kw))
    if args.phi is not None:
        cfg = dataclasses.replace(cfg, reg=Regularization.builtin(args.phi))
    return cfg


def _cycle_summary(cycle) -> dict:
    hm = cycle.half_map
    return {
        "eta_minus": cycle.eta_minus,
        "eta_plus": cycle.eta_plus,
        "s0": cycle.s0,
        "zeros": [
            {"x0": z.x0, "multiplicity": z.label, "position": z.position, "parity": z.parity} for z in cycle.zeros
        ],
        "half_map": {
            "x_out": hm.x_out,
            "derivative_variational": hm.derivative,
            "derivative_liouville": hm.derivative_liouville,
            "agreement": hm.agreement,
            "transit_time": hm.transit_time,
        },
    }


def _sdi_summary(sdi) -> Optional[dict]:
    if sdi is None:
        return None
    out = to_plain(sdi)
    out["finite"] = sdi.finite
    out["I_sign"] = sdi.I_sign
    return out


class _Run:
    """Accumulates report sections and CSV artifacts for one configuration."""

    def __init__(self, cfg: AnalysisConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.report = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": "twofold", "version": __version__},
            "status": "ok",
            "model": cfg.echo(),
            "modeling_defaults": (
                ["breaking parameter enters additively as Y+ + lam (no field refers to lam)"]
                if cfg.model.lambda_additive
                else []
            ),
            "tolerances": cfg.tolerances.to_dict(),
            "diagnostics": [],
        }
        self.orbits = []

    def fail(self, status: str, exc: Exception, code: int) -> int:
        self.report["status"] = status
        self.report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        print(f"twofold: {status}: {type(exc).__name__}: {exc}", file=sys.stderr)
        self.finish()
        return code

    def finish(self) -> None:
        write_json(self.out / "report.json", self.report)
        if self.orbits:
            write_csv(self.out / "orbits.csv", ("orbit", "t", "x", "y"), self.orbits)

    def add_orbit(self, name: str, t, x, y) -> None:
        self.orbits.extend((name, float(a), float(b), float(c)) for a, b, c in zip(t, x, y))


def _curves(run: _Run, cycle) -> None:
    cfg = run.cfg
    c = cycle.c
    line = SwitchingLine(cfg.model, c)
    xs = np.linspace(cycle.eta_minus, cycle.eta_plus, 201)
    write_csv(
        run.out / "sliding_field.csv",
        ("x", "det_Z", "sliding_field"),
        ((float(x), float(line.det(x)), float(line.sliding(x))) for x in xs),
    )
    try:
        rows = sdi_curve(cfg.model, cfg.reg, c, np.linspace(cycle.eta_plus / 100, cycle.eta_plus, 100), cfg.tolerances)
        write_csv(run.out / "sdi_curve.csv", ("x", "I", "dIdx", "divergent"), rows.tolist())
    except TwofoldError as exc:
        run.report["diagnostics"].append(f"sdi curve not exported: {type(exc).__name__}: {exc}")
    hm = cycle.half_map.orbit
    run.add_orbit("gamma-lower", hm[:, 0], hm[:, 1], hm[:, 2])
    n = 101
    run.add_orbit("gamma-sliding", np.zeros(n), np.linspace(cycle.eta_minus, cycle.eta_plus, n), np.zeros(n))


def _simulate(run: _Run, cycle, verdict, jobs: int) -> None:
    cfg = run.cfg
    sim = cfg.simulation
    reports = sweep(
        cfg.model, cfg.reg, cycle, sim.eps_grid, sim.lambda_grid, sim.grid, cfg.tolerances, jobs, sim.chart,
        half_width=sim.half_width,
    )
    geom = CycleGeometry.from_cycle(cycle)
    samples, results = [], []
    for rep in reports:
        for y0, P, slope, status in rep.samples:
            samples.append((rep.eps, rep.lambda_tilde, y0, P, slope, status))
        spec = ReturnMapSpec.around(cycle, rep.eps, rep.lambda_tilde, sim.half_width)
        for k, fp in enumerate(rep.fixed_points):
            r = return_map(cfg.model, cfg.reg, spec, fp.y, geom, cfg.tolerances, sim.chart, keep_orbit=True)
            o = r.orbit
            run.add_orbit(f"cycle-eps{rep.eps:g}-lam{rep.lambda_tilde:g}-{k}", o.t, o.x, o.y)
        results.append(
            {
                "eps": rep.eps,
                "lambda_tilde": rep.lambda_tilde,
                "count": rep.count,
                "returns": rep.returns,
                "fixed_points": to_plain(rep.fixed_points),
                "diagnostics": list(rep.diagnostics),
            }
        )
    write_csv(run.out / "return_map_samples.csv", ("eps", "lambda_tilde", "y0", "P", "slope", "status"), samples)
    manifest = {
        "eps_grid": list(sim.eps_grid),
        "lambda_grid": list(sim.lambda_grid),
        "grid": sim.grid,
        "half_width": sim.half_width,
        "chart": sim.chart,
        "delta": cfg.tolerances.delta,
        "t_budget_over_eps2": cfg.tolerances.t_budget,
    }
    write_json(run.out / "sweep.json", {"schema_version": SCHEMA_VERSION, "manifest": manifest, "results": results})
    max_count = max((r["count"] for r in results), default=0)
    consistent = None
    if verdict.kind == "bound":
        consistent = max_count <= verdict.bound
    elif verdict.kind == "no limit cycles":
        consistent = max_count == 0
    run.report["simulation"] = {
        "manifest": manifest,
        "results": results,
        "max_count": max_count,
        "consistent_with_verdict": consistent,
    }


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = _apply_overrides(load_config(args.config, args.tolerances), args)
    except ConfigError as exc:
        print(f"twofold: malformed input: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_ = _Run(cfg, out)
    rep = run_.report
    c = cfg.model.resolve_c(cfg.ctx.c)
    try:
        if cfg.pwl is not None:
            try:
                cfg.pwl.check()
            except ConfigError as exc:
                raise AssumptionError(str(exc)) from None
        cert = certify_two_fold(cfg.model, c, tol=cfg.tolerances)
        rep["certificate"] = to_plain(cert)
        if not cert.passes:
            raise AssumptionError(f"two-fold certificate fails: {', '.join(cert.failed) or 'nu <= 0'}")
        cycle, case, sdi, saddle, verdict = analyze_cycle(cfg.model, cfg.reg, c, cfg.eta_plus, cfg.tolerances)
        rep["cycle"] = _cycle_summary(cycle)
        rep["case"] = to_plain(case)
        rep["sdi"] = _sdi_summary(sdi)
        rep["corner_saddles"] = to_plain(saddle)
        rep["verdict"] = to_plain(verdict)
        rep["verdict"]["summary"] = verdict.describe()
        if cfg.pwl is not None:
            rep["pwl"] = {
                "lower_field": to_plain(portrait(cfg.pwl)),
                "corner_configuration": to_plain(thm_appl_case(cfg.pwl, cycle.eta_minus, cycle.eta_plus)),
            }
        _curves(run_, cycle)
        if args.simulate:
            _simulate(run_, cycle, verdict, args.jobs)
    except (AssumptionError, InsufficientData) as exc:
        return run_.fail("assumption-failure", exc, EXIT_ASSUMPTION)
    except NumericalError as exc:
        return run_.fail("numerical-failure", exc, EXIT_NUMERICAL)
    run_.finish()
    print(rep["verdict"]["summary"])
    sim = rep.get("simulation")
    if sim is not None:
        print(
            f"simulation: largest count {sim['max_count']} over {len(sim['results'])} (eps, lambda~) points; "
            f"consistent with verdict: {sim['consistent_with_verdict']}"
        )
    return EXIT_OK


def main() -> None:
    sys.exit(run())
