"""Compare the compiled kernels with the uncompiled fallback.

Each backend runs in its own interpreter because the choice is made at import
time from ``MTPPQUERY_DISABLE_JIT``.  Prints per-sample times and checks that
both backends produce the same estimates.

    python3 benchmarks/bench_backends.py [--samples 400]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
from mtppquery import JIT_ENABLED, HawkesModel, random_hawkes
from mtppquery import hitting_time_cdf_estimate, nth_mark_estimate, a_before_b_estimate

n = int(sys.argv[1])
model = HawkesModel(random_hawkes(5, 0.6, seed=11))
jobs = {
    "hitting_time": lambda k: hitting_time_cdf_estimate(model, None, 0.0, [0, 1], 5.0, k, seed=3),
    "nth_mark": lambda k: nth_mark_estimate(model, None, 0.0, 4, [2], k, seed=3),
    "a_before_b": lambda k: a_before_b_estimate(model, None, 0.0, [0], [3], k, seed=3),
}
out = {"jit": JIT_ENABLED}
for name, job in jobs.items():
    job(2)  # compile / warm up
    t0 = time.perf_counter()
    res = job(n)
    dt = time.perf_counter() - t0
    out[name] = {"value": res.value, "us_per_sample": 1e6 * dt / n}
print(json.dumps(out))
"""


def run(samples, disable):
    env = dict(os.environ)
    env.pop("MTPPQUERY_DISABLE_JIT", None)
    if disable:
        env["MTPPQUERY_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(samples)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=400)
    args = ap.parse_args()
    fast, slow = run(args.samples, False), run(args.samples, True)
    print(f"{'query':<14}{'numba us':>12}{'python us':>12}{'speedup':>10}  values agree")
    for name in ("hitting_time", "nth_mark", "a_before_b"):
        f, s = fast[name], slow[name]
        agree = abs(f["value"] - s["value"]) <= 1e-9
        print(f"{name:<14}{f['us_per_sample']:>12.1f}{s['us_per_sample']:>12.1f}"
              f"{s['us_per_sample'] / f['us_per_sample']:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
