"""Time the compiled and numpy kernel backends side by side.

    python benchmarks/bench_kernels.py [--number N] [--closed-loop]

``--closed-loop`` also times one short closed-loop replica per backend in a
subprocess, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from active_sysid.kernels import available_backends
from active_sysid.linalg import random_pd

CLOSED_LOOP = (
    "import time; from active_sysid.config import load_config; from active_sysid.harness import run_replica;"
    "from active_sysid.kernels import BACKEND; cfg = load_config(overrides=['T=500']);"
    "t = time.perf_counter(); run_replica(cfg, 0); print(BACKEND, time.perf_counter() - t)"
)


def cases(rng, m=8, d=3, c=6):
    M = rng.standard_normal((d, m))
    K = random_pd(m, rng, 1.0, 5.0)
    P = np.linalg.inv(K)
    Q = random_pd(d, rng, 0.5, 2.0)
    x, y = rng.standard_normal(m), rng.standard_normal(d)
    H = random_pd(c, rng, 0.5, 2.0)
    b = rng.standard_normal(c)
    u0 = np.ones(c)

    def update(mod):
        Mc, Pc, Kc, Qc = M.copy(), P.copy(), K.copy(), Q.copy()
        return lambda: mod.rank_one_update(Mc, Pc, Kc, Qc, x, y)

    return {
        "rank_one_update": update,
        "quad_form": lambda mod: lambda: mod.quad_form(P, x),
        f"box_vertex_argmax c={c}": lambda mod: lambda: mod.box_vertex_argmax(H, b, 1.0, 1e-12),
        f"box_cd_argmin c={c}": lambda mod: lambda: mod.box_cd_argmin(H, b, 1.0, np.zeros(c), 1e-12, 1000),
        f"flip_ascent c={c}": lambda mod: lambda: mod.flip_ascent(H, b, 1.0, u0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--number", type=int, default=20000, help="calls per timing")
    ap.add_argument("--closed-loop", action="store_true", help="also time a 500-step replica per backend")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the numpy backend only", file=sys.stderr)
    names = list(backends)
    print(f"{'kernel':<24}" + "".join(f"{n + ' (us)':>16}" for n in names) + f"{'speedup':>10}")
    for label, make in cases(np.random.default_rng(0)).items():
        per = {}
        for name, mod in backends.items():
            fn = make(mod)
            per[name] = min(timeit.repeat(fn, number=args.number, repeat=3)) / args.number * 1e6
        speed = f"{per['python'] / per['cython']:>9.1f}x" if "cython" in per else ""
        print(f"{label:<24}" + "".join(f"{per[n]:>16.2f}" for n in names) + speed)

    if args.closed_loop:
        for name in names:
            env = dict(os.environ)
            env.pop("ACTIVE_SYSID_PURE_PYTHON", None)
            if name == "python":
                env["ACTIVE_SYSID_PURE_PYTHON"] = "1"
            out = subprocess.run([sys.executable, "-c", CLOSED_LOOP], env=env, capture_output=True, text=True,
                                 check=True)
            backend, seconds = out.stdout.split()
            print(f"closed loop T=500 [{backend}]: {float(seconds):.2f}s")


if __name__ == "__main__":
    main()
