"""Compare the compiled and pure-Python sampler kernels on one synthetic
cohort: verify the traces are bit-identical, then report wall time and
speedup.

Usage: python3 benchmarks/bench_backends.py [--n 300] [--n-iter 40] [--n-rep 20]
"""

import argparse
import time

import numpy as np

from acbm import (
    Hyperparams,
    SamplerConfig,
    available_backends,
    dgp1_design,
    generate_acbm,
    run_chain,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--n-iter", type=int, default=40)
    ap.add_argument("--n-rep", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    backends = available_backends()
    print(f"available backends: {backends}")
    X, _ = generate_acbm(dgp1_design(args.n, seed=args.seed))
    h = Hyperparams()
    config = SamplerConfig(n_iter=args.n_iter, n_rep=args.n_rep, seed=args.seed)

    traces, times = {}, {}
    for name in backends:
        t0 = time.perf_counter()
        traces[name] = run_chain(X, h, config, backend=name)
        times[name] = time.perf_counter() - t0
        print(f"{name:>9}: {times[name]:8.3f} s "
              f"({config.n_iter} outer iterations, n={args.n}, D={X.n_questions})")

    if len(backends) == 2:
        a, b = (traces[n] for n in backends)
        same = (
            np.array_equal(a.col, b.col)
            and np.array_equal(a.row, b.row)
            and np.array_equal(a.log_joint, b.log_joint)
        )
        print(f"traces bit-identical: {same}")
        if not same:
            raise SystemExit("backend traces diverge")
        slow = max(times.values())
        fast = min(times.values())
        print(f"speedup: {slow / fast:.1f}x")


if __name__ == "__main__":
    main()
