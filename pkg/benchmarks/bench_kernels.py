"""Compare the compiled and numpy kernel backends on ICEWS14-sized synthetic data.

    python benchmarks/bench_kernels.py [--facts 90730] [--repeat 3]
"""
import argparse
import time

import numpy as np

from rlgnet import kernels
from rlgnet.data import add_reverse_relations
from rlgnet.protocol import filter_lists
from rlgnet.synthetic import random_sequence


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--entities", type=int, default=7128)
    p.add_argument("--relations", type=int, default=230)
    p.add_argument("--facts", type=int, default=90730)
    p.add_argument("--timestamps", type=int, default=365)
    p.add_argument("--queries", type=int, default=2000, help="rows of the ranking benchmark")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    seq = add_reverse_relations(random_sequence(args.entities, args.relations, args.facts, args.timestamps))
    q = seq.quadruples()
    E, R = seq.num_entities, seq.num_relations
    rng = np.random.default_rng(0)
    snap = q[rng.choice(len(q), args.queries, replace=False), :3]
    snap = np.unique(snap, axis=0)
    scores = rng.normal(size=(snap.shape[0], E))
    ptr, idx = filter_lists(snap)

    print(f"backends available: {sorted(kernels.BACKENDS)} (default: {kernels.BACKEND})")
    print(f"{len(q)} augmented facts, {snap.shape[0]} x {E} ranking matrix")
    print(f"{'kernel':<22} {'backend':<8} {'seconds':>9} {'speedup':>8}")
    results = {}
    for name, fn in (
        ("repeating_mask k=20", lambda b: kernels.repeating_mask(q[:, 0], q[:, 1], q[:, 2], q[:, 3], E, R, 20, backend=b)),
        ("repeating_mask k=inf", lambda b: kernels.repeating_mask(q[:, 0], q[:, 1], q[:, 2], q[:, 3], E, R, None, backend=b)),
        ("filtered_ranks", lambda b: kernels.filtered_ranks(scores, snap[:, 2], ptr, idx, backend=b)),
    ):
        base = None
        for backend in ("python", "cython"):
            if backend not in kernels.BACKENDS:
                continue
            secs, out = best_of(lambda: fn(backend), args.repeat)
            base = base or secs
            results[(name, backend)] = out
            print(f"{name:<22} {backend:<8} {secs:9.4f} {base / secs:7.1f}x")
        if "cython" in kernels.BACKENDS:
            assert np.array_equal(results[(name, "python")], results[(name, "cython")]), name


if __name__ == "__main__":
    main()
