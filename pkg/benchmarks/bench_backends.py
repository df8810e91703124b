"""Time the numba kernels against the pure fallback.

Each backend runs in its own interpreter because the choice is made at import
time from ``ONLINECOLOR_NO_NUMBA``.

    python benchmarks/bench_backends.py [--n 2000] [--d 16] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from onlinecolor import BACKEND, GeneratorSpec, RandomSource, generate
from onlinecolor.coloring import run_strategy
from onlinecolor.matcher import match_counts

n, d, repeat = (int(x) for x in sys.argv[1:4])
st = generate(GeneratorSpec("random-regular", n=n, d=d, order="uniformly-random"), 1)
us, vs, ids = st.arrays()
jobs = {
    "matcher x10": lambda: match_counts(us, vs, ids, st.n, 2.0 * d, 1, 10),
    "greedy": lambda: run_strategy("greedy", st, RandomSource(1)),
    "tree-coloring": lambda: run_strategy("tree-coloring", st, RandomSource(1)),
    "cascade": lambda: run_strategy("cascade", st, RandomSource(1)),
}
out = {"backend": BACKEND, "m": st.m}
for name, fn in jobs.items():
    fn()  # warm-up (compilation)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out[name] = best
print(json.dumps(out))
"""


def run(no_numba: bool, args) -> dict:
    env = dict(os.environ)
    env.pop("ONLINECOLOR_NO_NUMBA", None)
    if no_numba:
        env["ONLINECOLOR_NO_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(args.n), str(args.d), str(args.repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    fast, pure = run(False, args), run(True, args)
    print(f"random-regular n={args.n} d={args.d} m={fast['m']}, best of {args.repeat}")
    print(f"{'job':16s} {fast['backend']:>10s} {pure['backend']:>10s} {'speedup':>8s}")
    for job in fast:
        if job in ("backend", "m"):
            continue
        print(f"{job:16s} {fast[job]:10.4f} {pure[job]:10.4f} {pure[job] / fast[job]:8.1f}x")


if __name__ == "__main__":
    main()
