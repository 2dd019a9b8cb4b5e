"""Compare the numba kernels with the pure-Python fallback.

Each path runs in its own interpreter because the switch
(``GRADHYD_DISABLE_NUMBA``) is read at import time.

    python benchmarks/bench_kernels.py [--n-total 60] [--calls 2000]

The interpreted path is slow (about 170 Heun steps per simulated day at the
default tolerances), so the integration benchmark uses a short window.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from gradhyd._jit import NUMBA_ENABLED
from gradhyd.models import Hmodel, Hymod
from gradhyd.solver import integrate_augmented, integrate_states
from gradhyd.synthetic import SyntheticSpec, synthetic_forcing

n_total, calls = int(sys.argv[1]), int(sys.argv[2])
forcing = synthetic_forcing(SyntheticSpec(seed=0, n_total=n_total, spin_up=0))
out = {"numba": NUMBA_ENABLED}
for model in (Hymod(), Hmodel()):
    theta = model.space.midpoint()
    x = model.sample_state(theta, np.random.default_rng(0))
    kp = model.kernel_params(theta)
    f = np.empty(model.m); jx = np.empty((model.m, model.m)); jth = np.empty((model.m, model.d))
    model.kernel(x, kp, 5.0, 2.0, f, jx, jth, True)  # compile / warm up
    integrate_augmented(model, theta, forcing)
    t0 = time.perf_counter()
    for _ in range(calls):
        model.kernel(x, kp, 5.0, 2.0, f, jx, jth, True)
    t_kernel = (time.perf_counter() - t0) / calls
    t0 = time.perf_counter()
    traj = integrate_augmented(model, theta, forcing)
    t_aug = time.perf_counter() - t0
    t0 = time.perf_counter()
    integrate_states(model, theta, forcing, schedule=traj.schedule)
    t_replay = time.perf_counter() - t0
    out[model.name] = {"kernel_us": 1e6 * t_kernel, "augmented_s": t_aug, "replay_s": t_replay,
                       "steps": traj.stats.accepted, "q_end": float(traj.states[-1, -1])}
print(json.dumps(out))
"""


def run(disable: bool, n_total: int, calls: int) -> dict:
    env = dict(os.environ)
    env.pop("GRADHYD_DISABLE_NUMBA", None)
    if disable:
        env["GRADHYD_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(n_total), str(calls)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-total", type=int, default=60)
    ap.add_argument("--calls", type=int, default=2000)
    args = ap.parse_args(argv)

    fast = run(False, args.n_total, args.calls)
    slow = run(True, args.n_total, args.calls)
    if not fast["numba"]:
        print("numba is not available; both runs used the fallback", file=sys.stderr)
    print(f"{args.n_total}-step window, {args.calls} kernel calls")
    print(f"{'model':8s} {'quantity':14s} {'numba':>12s} {'python':>12s} {'ratio':>8s}")
    for name in ("hymod", "hmodel"):
        a, b = fast[name], slow[name]
        for key, unit in (("kernel_us", "us"), ("augmented_s", "s"), ("replay_s", "s")):
            print(f"{name:8s} {key:14s} {a[key]:10.4g}{unit:>2s} {b[key]:10.4g}{unit:>2s} {b[key] / a[key]:7.0f}x")
        same = a["steps"] == b["steps"] and abs(a["q_end"] - b["q_end"]) <= 1e-9 * max(1.0, abs(a["q_end"]))
        print(f"{name:8s} paths agree: {same} ({a['steps']} steps)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
