"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in a fresh interpreter because the choice is made at import
time from ``NETMOMENTS_DISABLE_NUMBA``. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from netmoments import _accel, abm, classic, eigen
from netmoments.network import from_upper

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
nets = [from_upper(rng.uniform(1, 20, 15), 6) for _ in range(200)]
big = from_upper(rng.uniform(1, 20, 40 * 39 // 2), 40)
params = abm.SimParams()

def best(fn):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

out = {
    "backend": _accel.backend(),
    "power_iteration_200x6": best(lambda: [eigen.summarize(n) for n in nets]),
    "shortest_paths_200x6": best(lambda: [classic.shortest_paths(n) for n in nets]),
    "shortest_paths_40": best(lambda: classic.shortest_paths(big)),
    "local_efficiency_40": best(lambda: classic.local_efficiency(big)),
    "abm_spread_50reps": best(lambda: [abm.run_scenario("spread", nets[0], params, k) for k in range(50)]),
    "abm_survival_2000steps_20reps": best(
        lambda: [abm.run_scenario("survival", nets[1], params, k, max_steps=2000) for k in range(20)]),
}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("NETMOMENTS_DISABLE_NUMBA", None)
    if disable:
        env["NETMOMENTS_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'benchmark':34s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:34s} {fast[key]:10.4f} {slow[key]:10.4f} {slow[key] / fast[key]:8.1f}x")


if __name__ == "__main__":
    main()
