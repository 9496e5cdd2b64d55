"""Time the gmpy2 and Fraction backends on the same workloads.

The backend is fixed at import, so each one runs in its own interpreter.
Outputs are compared as JSON to make sure both backends agree exactly.

    python benchmarks/bench_backends.py [--order 25] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from lambda_ext import BACKEND, Series, to_q
from lambda_ext.catalog import default_catalog
from lambda_ext.odes import OdeSpec
from lambda_ext.solver import solve_family
from lambda_ext.families import get_def, seed_for

order, repeat = int(sys.argv[1]), int(sys.argv[2])

def ring():
    a = Series([to_q(f"{(-1) ** n}/{n + 1}") for n in range(8 * order + 1)])
    return ((a * a).inverse() * a).to_json()

def expand():
    return default_catalog().series("C11_lowT", 2 * order).to_json()

def solve():
    fd = get_def("C05")
    return solve_family(fd.spec, seed_for(fd), order).series.to_json()

out = {"backend": BACKEND, "timings": {}, "results": {}}
for name, fn in (("ring", ring), ("expand", expand), ("solve", solve)):
    best = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    out["timings"][name] = best
    out["results"][name] = res
print(json.dumps(out))
"""


def run(backend, order, repeat):
    env = dict(os.environ, LAMBDA_EXT_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(order), str(repeat)],
                          env=env, capture_output=True, text=True)
    if proc.returncode:
        return None, proc.stderr.strip().splitlines()[-1]
    return json.loads(proc.stdout), None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--order", type=int, default=25)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    runs = {}
    for backend in ("gmpy2", "fraction"):
        res, err = run(backend, args.order, args.repeat)
        if err:
            print(f"{backend:9s} unavailable: {err}")
            continue
        runs[backend] = res
        print(f"{backend:9s} " + "  ".join(f"{k}={v:.3f}s" for k, v in res["timings"].items()))

    if len(runs) == 2:
        g, f = runs["gmpy2"], runs["fraction"]
        same = g["results"] == f["results"]
        print("results identical" if same else "RESULTS DIFFER")
        for k in g["timings"]:
            print(f"speedup {k}: {f['timings'][k] / g['timings'][k]:.1f}x")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
