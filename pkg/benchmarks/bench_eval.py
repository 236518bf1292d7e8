"""Benchmark: compiled evaluation kernel vs the pure-Python fallback.

Three representative workloads:

* ``residual``  - zero-identity sampling of the time-optimal dynamics
                  residual (the check command's hot loop),
* ``integrate`` - RK4 integration of the scaling problem under a feedback
                  law (the verify command's hot loop),
* ``sweep``     - conserved-current evaluation along a 20k-node trajectory
                  (row sweep through the table kernel).

Run with ``python benchmarks/bench_eval.py``.  The pure backend is driven
through the same engine entry points by temporarily swapping the
implementation module, so both sides execute identical programs.
"""

from __future__ import annotations

import random
import time

import numpy as np

from noethercheck import engine
from noethercheck import _evalpure
from noethercheck.conservation import evaluate_current_along
from noethercheck.expr import Context, sample_env, sorted_symbols, symbols
from noethercheck.extremal import FeedbackLaw, integrate_extremal
from noethercheck.grammar import parse
from noethercheck.noether import generate_currents
from noethercheck.problem import Bound, OcpProblem
from noethercheck.symmetry import GaugeSymmetry, invariance_residuals

try:
    from noethercheck import _evalcore
except ImportError:
    _evalcore = None


def _fixtures():
    ctx = Context(n=1, r=1, k=1, m=2)
    time_optimal = OcpProblem(
        "time_optimal", 1, 1, 0.0, 1.0,
        parse("1", ctx), (parse("u1", ctx),), (Bound(-1.0, 1.0),),
    )
    scale_sym = GaugeSymmetry(
        k=1, m=2,
        T=parse("p1 + t", ctx),
        X=(parse("(dp1 + 1)^2 * x1", ctx),),
        U=(parse("2*ddp1*x1 + (dp1 + 1)*u1", ctx),),
        F=parse("p1", ctx),
        lam=((0.0, 0.0, 0.0),),
    )
    ctx1 = Context(n=1, r=1, k=1, m=1)
    scaling = OcpProblem(
        "scaling", 1, 1, 0.0, 1.0,
        parse("u1", ctx1), (parse("x1 * u1", ctx1),), (Bound(-3.0, 3.0),),
    )
    scaling_sym = GaugeSymmetry(
        k=1, m=1,
        T=parse("t", ctx1),
        X=(parse("exp(p1) * x1", ctx1),),
        U=(parse("u1 + dp1", ctx1),),
        F=parse("p1", ctx1),
        lam=((0.0, 0.0),),
    )
    law = FeedbackLaw((parse("x1", ctx1, allow_costates=True),))
    return time_optimal, scale_sym, scaling, scaling_sym, law


def bench_residual(problem, sym, repeats=2000):
    _, r_dyn = invariance_residuals(sym, problem)
    e = r_dyn[0]
    program = engine.compile_cached(e, None)
    rng = random.Random(0)
    syms = sorted_symbols(symbols(e))
    envs = [sample_env(syms, rng) for _ in range(50)]
    slot_arrays = [
        np.array([env.values[s] for s in program.syms]) for env in envs
    ]
    t0 = time.perf_counter()
    acc = 0.0
    for _ in range(repeats // 50):
        for slots in slot_arrays:
            acc += engine.run(program, slots)
    return time.perf_counter() - t0, acc


def bench_integrate(problem, law, steps=4000):
    t0 = time.perf_counter()
    traj = integrate_extremal(problem, law, [0.5], -1.0, [2.0], steps=steps)
    return time.perf_counter() - t0, traj


def bench_sweep(problem, sym, law, nodes=20000):
    currents = [
        c for c in generate_currents(sym, problem) if not c.trivial
    ]
    traj = integrate_extremal(problem, law, [0.5], -1.0, [2.0], steps=nodes)
    t0 = time.perf_counter()
    for _ in range(20):
        for c in currents:
            evaluate_current_along(c, traj)
    return time.perf_counter() - t0, None


def run_suite():
    time_optimal, scale_sym, scaling, scaling_sym, law = _fixtures()
    results = {}
    results["residual"] = bench_residual(time_optimal, scale_sym)[0]
    results["integrate"] = bench_integrate(scaling, law)[0]
    results["sweep"] = bench_sweep(scaling, scaling_sym, law)[0]
    return results


def main():
    if _evalcore is None:
        print("compiled kernel not built; benchmarking the pure backend only")
        backends = [("pure", _evalpure)]
    else:
        backends = [("compiled", _evalcore), ("pure", _evalpure)]
    original = engine._impl
    timings = {}
    try:
        for name, impl in backends:
            engine._impl = impl
            timings[name] = run_suite()
    finally:
        engine._impl = original
    workloads = ("residual", "integrate", "sweep")
    header = f"{'workload':<12}" + "".join(f"{n:>12}" for n, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for w in workloads:
        row = f"{w:<12}"
        for name, _ in backends:
            row += f"{timings[name][w]:>11.3f}s"
        if len(backends) == 2:
            row += f"{timings['pure'][w] / timings['compiled'][w]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
