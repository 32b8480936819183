#!/usr/bin/env python3
"""Benchmark the block-aggregated drift path against the quadratic one.

The fast path evaluates the affine interaction drift from per-block
aggregates in O(n + K^2); the generic path reduces the full n x n weight
matrix.  Prints timings and the speedup ratio.
"""
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from gmfs.dynamics import linear_drift  # noqa: E402
from gmfs.engine import ParticleState, drift_eval  # noqa: E402
from gmfs.graphon import Graphon, sample_edges  # noqa: E402


def bench(n=5000, blocks=4, repeats=20, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.random((blocks, blocks))
    g = Graphon.from_step(np.linspace(0, 1, blocks + 1), 0.5 * (vals + vals.T))
    spec = linear_drift(const_f=0.1, slope_f=2.0, const_b=0.3, self_b=0.5,
                        other_b=0.3)
    state = ParticleState(t=0.0, positions=rng.standard_normal((n, 1)),
                          edges=sample_edges(g, n, "deterministic"))
    state.edges.values  # materialize outside the timed region

    def timeit(route):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            drift_eval(state, spec, route=route)
            best = min(best, time.perf_counter() - t0)
        return best

    fast = timeit("fast")
    generic = timeit("generic")
    gap = np.max(np.abs(drift_eval(state, spec, route="fast")
                        - drift_eval(state, spec, route="generic")))
    print(f"n={n} blocks={blocks}")
    print(f"fast    {fast * 1e3:9.3f} ms")
    print(f"generic {generic * 1e3:9.3f} ms")
    print(f"speedup {generic / fast:9.1f}x   max abs gap {gap:.2e}")
    return generic / fast


if __name__ == "__main__":
    ratio = bench(*(int(a) for a in sys.argv[1:]))
    sys.exit(0 if ratio >= 10 else 2)
