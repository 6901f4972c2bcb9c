"""Timing comparison of the compiled and pure-NumPy kernel backends.

Runs each kernel on a synthetic sparse corpus and prints the best-of-N wall
time per backend plus the speedup. The sequential per-example kernels
(svrg_epoch, cocoa_local) are where the compiled backend pays off; the
vectorized full-pass kernels are close to NumPy already.

Usage:
    python3 benchmarks/bench_kernels.py [--steps 20000] [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fedopt._kernels import available_backends
from fedopt.generator import GenConfig, generate


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20_000,
                        help="sequential steps for svrg_epoch / cocoa_local")
    parser.add_argument("--repeats", type=int, default=5,
                        help="repetitions per measurement (best is kept)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg = GenConfig(num_nodes=20, num_features=2000, min_node_size=75,
                    max_node_size=1000, mean_node_size=200.0, seed=args.seed)
    train = generate(cfg).train
    d = train.d
    rng = np.random.default_rng(args.seed)
    w = rng.normal(scale=0.05, size=d)
    w_tilde = w + rng.normal(scale=0.01, size=d)
    lam = 1.0 / train.n
    print(f"corpus: n={train.n} d={d} nnz={train.indices.shape[0]} "
          f"steps={args.steps} repeats={args.repeats}")

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the python backend only")

    g_tilde = backends["python"].full_gradient(
        train.indptr, train.indices, train.values, train.labels, w_tilde, lam, 0)
    s_diag = rng.uniform(0.5, 4.0, size=d)
    row_sq = np.asarray([float(v @ v) for v in
                         np.split(train.values, train.indptr[1:-1])])
    samples = rng.integers(0, train.n, size=args.steps).astype(np.int64)

    def run_margins(mod):
        return lambda: mod.margins(train.indptr, train.indices, train.values, w, 0)

    def run_loss(mod):
        return lambda: mod.loss_value(train.indptr, train.indices, train.values,
                                      train.labels, w, lam, 0)

    def run_grad(mod):
        return lambda: mod.full_gradient(train.indptr, train.indices, train.values,
                                         train.labels, w, lam, 0)

    def run_svrg(mod):
        def fn():
            wk = w.copy()
            mod.svrg_epoch(train.indptr, train.indices, train.values, train.labels,
                           samples, wk, w_tilde, g_tilde, s_diag, 0.05, lam, 0)
        return fn

    def run_cocoa(mod):
        def fn():
            v = np.zeros(d)
            alpha = np.zeros(train.n)
            mod.cocoa_local(train.indptr, train.indices, train.values, train.labels,
                            row_sq, samples, v, alpha, lam, train.n, 1.0, 0)
        return fn

    ops = [("margins", run_margins), ("loss_value", run_loss),
           ("full_gradient", run_grad),
           (f"svrg_epoch[{args.steps}]", run_svrg),
           (f"cocoa_local[{args.steps}]", run_cocoa)]

    names = [n for n in ("python", "cython") if n in backends]
    header = f"{'kernel':<22}" + "".join(f"{n + ' (ms)':>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for op_name, make in ops:
        times = {n: best_of(make(backends[n]), args.repeats) * 1e3 for n in names}
        line = f"{op_name:<22}" + "".join(f"{times[n]:>14.3f}" for n in names)
        if len(names) == 2:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
