"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from localcond import kernels
from localcond.conditioning import ColumnOrdering
from localcond.graph import build_grid
from localcond.local import _sum_out_groups
from localcond.model import random_ising


def cases(rng):
    psi = rng.uniform(0.5, 2.0, (2, 2))
    wide = rng.uniform(size=(2, 2 ** 12))
    _, groups = _sum_out_groups(ColumnOrdering(tuple(range(12)), 2), range(6))
    perm = rng.permutation(12)
    g = build_grid(4, 5)
    model = random_ising(g, rng)
    nodes = g.sorted_nodes()
    pos = {n: k for k, n in enumerate(nodes)}
    phi = np.array([model.potentials.phi(n) for n in nodes])
    edges = g.sorted_edges()
    psis = np.array([model.potentials.psi(i, j) for i, j in edges])
    eu = np.array([pos[i] for i, _ in edges], dtype=np.int64)
    ev = np.array([pos[j] for _, j in edges], dtype=np.int64)
    return {
        "propagate 2x4096": lambda b: b.propagate(psi, wide),
        "sum_groups 64x64": lambda b: b.sum_groups(wide, groups),
        "digit_permutation 12": lambda b: b.digit_permutation(12, 2, perm),
        "enumerate 4x5 grid": lambda b: b.enumerate_beliefs(phi, eu, ev, psis),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if kernels.compiled is None:
        print("compiled kernels unavailable; only the fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in cases(rng).items():
        times = {}
        for label, backend in (("python", kernels.python), ("compiled", kernels.compiled)):
            if backend is None:
                continue
            fn(backend)
            times[label] = min(timeit.repeat(lambda: fn(backend), number=1, repeat=args.repeat)) * 1e3
        if "compiled" in times:
            print(f"{name:<24}{times['python']:>12.3f}{times['compiled']:>14.3f}{times['python'] / times['compiled']:>9.1f}x")
        else:
            print(f"{name:<24}{times['python']:>12.3f}{'-':>14}{'-':>10}")


if __name__ == "__main__":
    main()
