"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--full-run]

Times the two per-stage kernels at several radial orders and, with
--full-run, a default 1C discharge under each backend (separate processes so
the dispatch choice is made at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from lfpsim import Discretization, ParameterSet, SaturationParams
from lfpsim.kernels import backends
from lfpsim.kinetics import PLAIN_ALPHA

RUN_SNIPPET = """
import time
from lfpsim.harness import SimulationConfig, run
import lfpsim.kernels as k
t0 = time.perf_counter()
run(SimulationConfig.from_dict({}))
print(k.BACKEND, time.perf_counter() - t0)
"""


def kernel_table(repeat):
    p, sp = ParameterSet(), SaturationParams()
    rng = np.random.default_rng(1)
    impls = backends()
    print(f"{'N3':>4} {'kernel':>11} " + " ".join(f"{name:>12}" for name in impls) + "   speedup")
    for n3 in (6, 12, 30):
        d = Discretization.build(p, sp, n_modes=n3)
        V, dV, wr2, inv_norm, surf = d.stacked()
        cs = np.ascontiguousarray(rng.uniform(0.0, p.c_s_max, (3, d.n_c, n3)) / np.arange(1, n3 + 1))
        gap = rng.uniform(3.3, 3.5, d.n_c)
        f = p.F / (2 * p.R_gas * p.T)
        calls = {
            "solid_flux": lambda fn: fn(cs, V, dV, wr2, inv_norm, p.D_solid, 1 / p.c_s_max, sp.a0, 1,
                                        PLAIN_ALPHA),
            "reaction": lambda fn: fn(cs, surf, gap, p.i0, f, sp.a0, sp.b0, 1 / p.c_s_max, 1, 0),
        }
        for idx, (kname, call) in enumerate(calls.items()):
            times = {}
            for name, pair in impls.items():
                fn = pair[idx]
                n = 2000
                times[name] = min(timeit.repeat(lambda: call(fn), number=n, repeat=repeat)) / n
            cells = " ".join(f"{times[name] * 1e6:10.2f}us" for name in impls)
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{n3:>4} {kname:>11} {cells}   {speed:6.1f}x")


def full_runs():
    for pure in ("0", "1"):
        env = dict(os.environ, LFPSIM_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", RUN_SNIPPET], env=env, capture_output=True,
                             text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"1C discharge, backend={backend:7s} wall clock {float(secs):7.2f} s "
              f"({100 * float(secs) / 3600:.2f}% of simulated time)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--full-run", action="store_true")
    args = ap.parse_args()
    kernel_table(args.repeat)
    if args.full_run:
        full_runs()


if __name__ == "__main__":
    main()
