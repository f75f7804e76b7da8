"""Timing comparison of the compiled and plain-Python kernel backends.

Each case is run in a subprocess with PAIRLOGIT_BACKEND pinned, so both
paths start from a cold interpreter; the compiled path reports its one-off
compilation cost separately from steady-state sampling throughput.

Usage: python3 bench/bench_kernels.py [--pairs 150] [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys

SNIPPET = """
import json
import time

import numpy as np

t0 = time.perf_counter()
from pairlogit import (
    PriorKind, PriorSpec, SamplerConfig, active_backend, build_prior_spec,
    difference_discordant, partition_pairs, premodel_concordant,
    sample_posterior,
)
from pairlogit.data import PairedDataset

n_pairs = {n_pairs}
rng = np.random.default_rng(0)
x = rng.uniform(-1, 1, size=(2 * n_pairs, 2))
w = np.zeros(2 * n_pairs, dtype=np.int8)
w[0::2] = 1
eta = -0.3 + x @ np.array([0.9, -0.6]) + 0.5 * w
y = (rng.random(2 * n_pairs) < 1 / (1 + np.exp(-eta))).astype(np.int8)
data = PairedDataset(
    pair_id=np.repeat(np.arange(n_pairs), 2), treatment=w, response=y,
    covariates=x,
)
part = partition_pairs(data)
diffs = difference_discordant(data, part)
pre = premodel_concordant(data, part, "lr")
spec = build_prior_spec("{prior}", pre, diffs)
cfg = SamplerConfig(chains=4, warmup=1000, draws_per_chain=500, seed=1)

# first call pays any compilation cost
t1 = time.perf_counter()
sample_posterior(diffs, spec, cfg)
t2 = time.perf_counter()

times = []
for rep in range({repeats}):
    start = time.perf_counter()
    sample_posterior(diffs, spec, cfg, n_threads={threads})
    times.append(time.perf_counter() - start)

print(json.dumps({{
    "backend": active_backend(),
    "import_s": t1 - t0,
    "first_call_s": t2 - t1,
    "steady_s": min(times),
}}))
"""


def run_case(backend, prior, n_pairs, repeats, threads):
    code = SNIPPET.format(
        n_pairs=n_pairs, prior=prior, repeats=repeats, threads=threads
    )
    env = dict(os.environ, PAIRLOGIT_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise RuntimeError(f"{backend}/{prior} failed:\n{proc.stderr}")
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=150)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    print(f"posterior sampling, {args.pairs} pairs, 4 chains x (1000 warmup "
          f"+ 500 draws), {args.threads} thread(s), best of {args.repeats}")
    header = f"{'prior':<8} {'backend':<7} {'first call':>11} {'steady':>9} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for prior in ("naive", "g", "pmp", "hybrid"):
        rows = {}
        for backend in ("numba", "numpy"):
            try:
                rows[backend] = run_case(
                    backend, prior, args.pairs, args.repeats, args.threads
                )
            except RuntimeError as exc:
                print(f"{prior:<8} {backend:<7} unavailable: {exc}")
        if len(rows) == 2:
            speed = rows["numpy"]["steady_s"] / rows["numba"]["steady_s"]
            for backend in ("numba", "numpy"):
                r = rows[backend]
                tag = f"{speed:7.1f}x" if backend == "numba" else ""
                print(f"{prior:<8} {backend:<7} {r['first_call_s']:>10.2f}s "
                      f"{r['steady_s'] * 1e3:>7.1f}ms {tag}")


if __name__ == "__main__":
    main()
