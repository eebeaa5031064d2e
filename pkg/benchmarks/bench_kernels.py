"""Numba vs numpy timings for the pointwise 2x2 field kernels.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 5]
"""

import argparse
import time

import numpy as np

from hcsk import _backend, kernels, realmm, verify
from hcsk.torus import hessian


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for N in sizes:
        phi, xi = verify.random_field_point(rng, N)
        G = hessian(phi)
        psi = verify.unit_direction(rng, N)
        results = {}
        for name in ("numpy", "numba"):
            if name == "numba" and _backend.numba is None:
                continue
            _backend.set_backend(name)
            kernels.frame(G, xi)  # warm up / compile
            fr = kernels.frame(G, xi)
            lin = kernels.Linearization(G, xi, fr)
            Gd = np.broadcast_to(np.eye(2), G.shape).copy()
            H = realmm.HessianOperator(phi, xi)
            results[name] = {
                "frame": _best(lambda: kernels.frame(G, xi), repeat),
                "tensor_derivative": _best(lambda: lin(Gd), repeat),
                "hessian_apply": _best(lambda: H(psi), repeat),
                "T": kernels.moment_tensor(fr),
            }
        agree = (np.abs(results["numba"]["T"] - results["numpy"]["T"]).max()
                 if "numba" in results else float("nan"))
        for op in ("frame", "tensor_derivative", "hessian_apply"):
            tn = results["numpy"][op]
            tb = results.get("numba", {}).get(op, float("nan"))
            rows.append((N, op, tn, tb, tn / tb, agree))
    _backend.set_backend("numba" if _backend.numba is not None else "numpy")
    print(f"{'N':>5} {'kernel':>18} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max|dT|':>9}")
    for N, op, tn, tb, sp, ag in rows:
        print(f"{N:5d} {op:>18} {1e3 * tn:11.3f} {1e3 * tb:11.3f} {sp:8.2f} {ag:9.1e}")
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    run(a.sizes, a.repeat)
