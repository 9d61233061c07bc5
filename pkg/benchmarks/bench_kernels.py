"""Compiled vs pure-Python integrator on representative return-map orbits.

Run ``python benchmarks/bench_kernels.py [--repeat N]``; prints one row per
case with the median wall time of each backend, the speedup and the largest
difference in the landing point.
"""
from __future__ import annotations

import argparse
import statistics
import time

from twofold.geometry import build_cycle
from twofold.kernels import compiled_available
from twofold.pwl import CANONICAL, PwlCoefficients, build_pwl
from twofold.regularization import ALGEBRAIC, ARCTAN
from twofold.simulate import ReturnMapSpec, return_map

CASES = [
    ("canonical arctan eps=0.1", CANONICAL, ARCTAN, 0.1, -0.1),
    ("canonical arctan eps=0.05", CANONICAL, ARCTAN, 0.05, -0.1),
    ("canonical algebraic eps=0.05", CANONICAL, ALGEBRAIC, 0.05, -0.1),
    ("regular arctan eps=0.025", PwlCoefficients(0, 0, 2, 0.5, 0, 1, 0), ARCTAN, 0.025, -0.05),
]


def _time(fn, repeat: int):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times), out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not compiled_available():
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    print(f"{'case':32s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s} {'|dP|':>10s}")
    for name, coeffs, reg, eps, lt in CASES:
        model = build_pwl(coeffs)
        cycle = build_cycle(model, None, 1.0)
        spec = ReturnMapSpec.around(cycle, eps, lt)
        y0 = cycle.s0 + 0.2 * abs(cycle.s0)

        def run(backend):
            return return_map(model, reg, spec, y0, backend=backend)

        tp, rp = _time(lambda: run("python"), args.repeat)
        tc, rc = _time(lambda: run("compiled"), args.repeat)
        print(f"{name:32s} {1e3 * tp:12.2f} {1e3 * tc:14.3f} {tp / tc:8.1f} {abs(rp.P - rc.P):10.2e}")


if __name__ == "__main__":
    main()
