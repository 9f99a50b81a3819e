"""Compare the compiled backend against the pure-numpy fallback.

The backend is fixed at import time by SYMSTEP_BACKEND, so each side runs in
its own subprocess and reports wall times for identical workloads through the
public API.  JIT compilation is warmed up before timing.  Run as

    python3 benchmarks/bench_backends.py
"""

import json
import os
import subprocess
import sys
import time

CASES = [
    ("verlet / kepler, 200k steps", "verlet", "kepler", 0.01, 200_000),
    ("s3-corrected / kepler, 50k steps", "s3-corrected", "kepler", 0.01, 50_000),
    ("verlet / lj-cluster(8), 20k steps", "verlet", "lj", 1e-4, 20_000),
    ("s3-corrected / lj-cluster(8), 2k steps", "s3-corrected", "lj", 1e-4, 2_000),
]


def build(model_name):
    import numpy as np

    import symstep as ss

    if model_name == "kepler":
        model = ss.make_model("kepler")
        s0 = ss.PhaseState((1.0, 0.0), (0.0, 1.0))
    else:
        rng = np.random.default_rng(0)
        model = ss.make_model("lj-cluster", dimension=24)
        grid = np.array([(i % 2, (i // 2) % 2, i // 4)
                         for i in range(8)], dtype=float) * 1.12
        q = grid.ravel() + rng.normal(size=24) * 0.01
        s0 = ss.PhaseState(q, rng.normal(size=24) * 0.05)
    return model, s0


def worker():
    import symstep as ss

    results = {"backend": ss.BACKEND, "times": []}
    for _name, variant, model_name, h, n in CASES:
        model, s0 = build(model_name)
        # the residual carries a 1/h factor, so the reachable tolerance does too
        solver = ss.SolverConfig(tolerance=max(1e-13, 1e-11 / h))
        ss.integrate(model, variant, s0, h, 64, record_stride=64,
                     solver_cfg=solver)  # warmup
        t0 = time.perf_counter()
        traj = ss.integrate(model, variant, s0, h, n, record_stride=n,
                            solver_cfg=solver)
        dt = time.perf_counter() - t0
        assert not traj.failed
        results["times"].append(dt)
    json.dump(results, sys.stdout)


def main():
    rows = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SYMSTEP_BACKEND=backend)
        out = subprocess.run([sys.executable, __file__, "--worker"],
                             env=env, capture_output=True, text=True,
                             check=True)
        data = json.loads(out.stdout)
        assert data["backend"] == backend
        rows[backend] = data["times"]

    print(f"{'case':40s}  {'numba (s)':>10s}  {'numpy (s)':>10s}  {'speedup':>8s}")
    for i, (name, *_rest) in enumerate(CASES):
        t_jit, t_py = rows["numba"][i], rows["numpy"][i]
        print(f"{name:40s}  {t_jit:10.4f}  {t_py:10.4f}  {t_py / t_jit:7.1f}x")


if __name__ == "__main__":
    if "--worker" in sys.argv:
        worker()
    else:
        main()
