"""Time the derivative-jet kernels: numba vs pure numpy.

    python3 benchmarks/bench_kernels.py --batch 32 --repeat 50

Both backends run in this process regardless of PINNFATIGUE_NUMBA; the flag
only selects which one the library dispatches to.
"""

import argparse
import time

import numpy as np

from pinnfatigue import _kernels
from pinnfatigue.network import SELU_ALPHA, SELU_LAMBDA, init_params


def _time(fn, repeat):
    fn()  # warm-up (includes JIT compilation for numba)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(dims, batch, repeat, seed=0):
    rng = np.random.default_rng(seed)
    params = init_params(dims, seed)
    theta = params.to_vector()
    d = np.asarray(dims, dtype=np.int64)
    X = rng.uniform(size=(batch, dims[0]))
    cols = np.array([0, 1, 2], dtype=np.int64)
    args = (theta, d, X, cols, True, 0, SELU_LAMBDA, SELU_ALPHA)
    rows = []
    backends = [("numpy", _kernels.forward_jet_numpy, _kernels.backward_jet_numpy)]
    if _kernels.HAVE_NUMBA:
        backends.append(("numba", _kernels.forward_jet_numba, _kernels.backward_jet_numba))
    ref = None
    for name, fwd, bwd in backends:
        out, *cache = fwd(*args)
        adj = np.ones_like(out)

        def step():
            o, *c = fwd(*args)
            bwd(*args, *c, adj)

        t_f = _time(lambda: fwd(*args), repeat)
        t_fb = _time(step, repeat)
        g = bwd(*args, *cache, adj)
        diff = 0.0 if ref is None else float(np.max(np.abs(g - ref)))
        ref = g if ref is None else ref
        rows.append((name, t_f, t_fb, diff))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, nargs="+", default=[32, 400])
    ap.add_argument("--dims", type=int, nargs="+", default=[44, 110, 70, 30, 1])
    ap.add_argument("--repeat", type=int, default=30)
    a = ap.parse_args()
    print(f"active backend: {_kernels.backend_name()}   dims: {a.dims}")
    print(f"{'batch':>6} {'backend':>8} {'fwd ms':>9} {'fwd+bwd ms':>11} {'max |dgrad|':>12}")
    for b in a.batch:
        for name, t_f, t_fb, diff in bench(tuple(a.dims), b, a.repeat):
            print(f"{b:>6} {name:>8} {t_f * 1e3:>9.3f} {t_fb * 1e3:>11.3f} {diff:>12.2e}")


if __name__ == "__main__":
    main()
