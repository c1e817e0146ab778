"""Compare the numba-compiled simplex kernels with their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py              # kernel micro-benchmarks
    python benchmarks/bench_kernels.py --solve 4    # plus an end-to-end solve per backend

Micro-benchmarks call both implementations directly on the same random data
(checking they agree) after a warm-up call that absorbs JIT compilation.  The
end-to-end part runs a generated instance in two subprocesses, one with
``PDPCD_DISABLE_NUMBA=1``, since the backend is fixed at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np
import scipy.sparse as sp

from pdpcd.lp import kernels as kn


def _data(m, n, density, seed):
    rng = np.random.default_rng(seed)
    A = sp.random(m, n, density=density, random_state=seed, format="csc")
    A.data = rng.uniform(-5, 5, A.nnz)
    A.sort_indices()
    state = rng.choice([kn.BASIC, kn.AT_LOWER, kn.AT_UPPER], size=n + m,
                       p=[m / (n + m), 0.6 * n / (n + m), 0.4 * n / (n + m)]).astype(np.int8)
    lb = np.zeros(n + m)
    ub = rng.uniform(1, 10, n + m)
    return dict(
        A=A, A_T=A.T.tocsr(), rho=rng.normal(size=m), state=state, lb=lb, ub=ub,
        d=np.abs(rng.normal(size=n + m)) * np.where(state == kn.AT_UPPER, -1, 1),
        xb=rng.uniform(-2, 12, m), lbb=np.zeros(m), ubb=rng.uniform(1, 10, m),
        weights=rng.uniform(0.5, 2, m), basic=rng.permutation(n + m)[:m].astype(np.int64),
        eta_rows=rng.integers(0, m, 60).astype(np.int64),
        eta_cols=rng.normal(size=(60, m)) + 3.0,
        vec=rng.normal(size=m), tau=rng.normal(size=m), alpha_q=rng.normal(size=m),
    )


def kernel_cases(D):
    m, n = D["A"].shape
    out_nb = np.zeros(n + m)
    out_np = np.zeros(n + m)
    indptr = D["A"].indptr.astype(np.int64)
    indices = D["A"].indices.astype(np.int64)
    flips = np.zeros(n + m, dtype=np.int64)
    alpha = kn.pivot_row_np(D["A_T"], D["rho"], D["state"], out_np).copy()
    return {
        "pivot_row": (
            lambda: kn.pivot_row_nb(indptr, indices, D["A"].data, D["rho"], D["state"], out_nb),
            lambda: kn.pivot_row_np(D["A_T"], D["rho"], D["state"], out_np)),
        "select_leaving": (
            lambda: kn.select_leaving_nb(D["xb"], D["lbb"], D["ubb"], D["weights"], 1e-7),
            lambda: kn.select_leaving_np(D["xb"], D["lbb"], D["ubb"], D["weights"], 1e-7)),
        "ratio_test": (
            lambda: kn.ratio_test_nb(alpha, D["d"], D["state"], D["lb"], D["ub"], -3.0,
                                     1e-10, 1e-12, False, flips),
            lambda: kn.ratio_test_np(alpha, D["d"], D["state"], D["lb"], D["ub"], -3.0,
                                     1e-10, 1e-12, False, flips)),
        "eta_ftran": (
            lambda: kn.eta_ftran_nb(D["eta_rows"], D["eta_cols"], 60, D["vec"].copy()),
            lambda: kn.eta_ftran_np(D["eta_rows"], D["eta_cols"], 60, D["vec"].copy())),
        "eta_btran": (
            lambda: kn.eta_btran_nb(D["eta_rows"], D["eta_cols"], 60, D["vec"].copy()),
            lambda: kn.eta_btran_np(D["eta_rows"], D["eta_cols"], 60, D["vec"].copy())),
        "dse_update": (
            lambda: kn.dse_update_nb(D["weights"].copy(), D["alpha_q"], D["tau"], 3, 2.0),
            lambda: kn.dse_update_np(D["weights"].copy(), D["alpha_q"], D["tau"], 3, 2.0)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.allclose(a, b)
    return a == b or (a is None and b is None)


def run_kernels(sizes, repeat):
    print(f"{'kernel':<16} {'m x n':>11} {'numba us':>10} {'numpy us':>10} {'speedup':>8} agree")
    for m, n in sizes:
        D = _data(m, n, density=min(1.0, 6.0 / m), seed=m + n)
        for name, (f_nb, f_np) in kernel_cases(D).items():
            agree = _same(f_nb(), f_np())  # first call also compiles
            t_nb = min(timeit.repeat(f_nb, number=200, repeat=repeat)) / 200 * 1e6
            t_np = min(timeit.repeat(f_np, number=200, repeat=repeat)) / 200 * 1e6
            print(f"{name:<16} {f'{m}x{n}':>11} {t_nb:>10.2f} {t_np:>10.2f} "
                  f"{t_np / t_nb:>7.1f}x {'yes' if agree else 'NO'}")


_SOLVE_SNIPPET = """
import json, time
from pdpcd.generator import generate_instance
from pdpcd.bnc import solve
inst = generate_instance(n={n}, num_vehicles=2, seed={seed})
solve(inst, log_every=0)  # warm-up (JIT, caches)
t = time.perf_counter()
res = solve(inst, log_every=0)
print(json.dumps({{"ost": res.objective, "NE": res.nodes, "cpu": time.perf_counter() - t}}))
"""


def run_solve(n, seed):
    print(f"\nend-to-end solve, generated n={n}, 2 vehicles, seed {seed}")
    results = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, PDPCD_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _SOLVE_SNIPPET.format(n=n, seed=seed)],
                             env=env, capture_output=True, text=True, check=True)
        results[label] = json.loads(out.stdout.strip().splitlines()[-1])
        r = results[label]
        print(f"  {label:<6} ost={r['ost']:.6f}  NE={r['NE']}  {r['cpu']:.2f}s")
    print(f"  speedup {results['numpy']['cpu'] / results['numba']['cpu']:.2f}x, "
          f"same objective: {abs(results['numba']['ost'] - results['numpy']['ost']) < 1e-6}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", type=int, metavar="N", help="also solve a generated n=N instance")
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args(argv)
    run_kernels([(100, 200), (300, 600), (1000, 2000)], args.repeat)
    if args.solve:
        run_solve(args.solve, args.seed)


if __name__ == "__main__":
    main()
