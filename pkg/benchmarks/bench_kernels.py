"""Benchmark the integrator kernels with and without numba.

Each backend runs in its own subprocess, because the backend is chosen once
at import time from QCURV_NO_NUMBA.  The workloads are the v_sph trajectory
and the shooting of one Delaunay orbit; both print the wall time of the
best of several repetitions (after one warm-up call, so numba compilation
is excluded) together with a checksum that must agree across backends.

    python3 benchmarks/bench_kernels.py [--n 5] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from qcurv import _jit
from qcurv.delaunay import integrate_v_sph, shoot_delaunay, ShootingConfig
from qcurv.core import coefficients

n, repeat = int(sys.argv[1]), int(sys.argv[2])
coeffs = coefficients(n, wide=True)
eps = 0.5 * coeffs.eps_n
cfg = ShootingConfig()

def vsph():
    return float(np.sum(integrate_v_sph(n, 5.0).states))

def orbit():
    return float(shoot_delaunay(eps, coeffs, cfg).kappa)

out = {"backend": _jit.BACKEND}
for name, func in (("v_sph", vsph), ("orbit", orbit)):
    check = func()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    out[name] = {"seconds": best, "checksum": check}
print(json.dumps(out))
"""


def run(no_numba: bool, n: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("QCURV_NO_NUMBA", None)
    if no_numba:
        env["QCURV_NO_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(n), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    fast = run(False, args.n, args.repeat)
    slow = run(True, args.n, args.repeat)
    print(f"{'workload':<8} {fast['backend']:>10} {slow['backend']:>10} {'speedup':>8}  checksum match")
    for name in ("v_sph", "orbit"):
        a, b = fast[name], slow[name]
        same = abs(a["checksum"] - b["checksum"]) <= 1e-12 * max(1.0, abs(a["checksum"]))
        print(f"{name:<8} {a['seconds']:>9.4f}s {b['seconds']:>9.4f}s {b['seconds'] / a['seconds']:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
