"""Compare the compiled kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 128 256 384] [--repeat 20]

Prints one line per kernel and size with the best-of-``repeat`` time of
each backend, their ratio and the largest difference between the results relative to
the largest entry.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from rotbec import _kernels_py

try:
    from rotbec import _kernels
except ImportError:  # extension not built
    _kernels = None


def _inputs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    x = np.linspace(-3, 3, n)
    h = x[1] - x[0]
    omega = 40.0
    ux = np.exp(0.5j * omega * x * h)
    uy = np.exp(-0.5j * omega * x * h)
    return np.ascontiguousarray(psi), ux, uy


def _sites(m: int, seed: int = 1):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-3, 3, size=(m, 2))
    return np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 384])
    ap.add_argument("--sites", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=10)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; only the NumPy backend can run")
        return
    print(f"{'kernel':<24}{'n':>6}{'cython [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}{'rel diff':>12}")
    for n in args.sizes:
        psi, ux, uy = _inputs(n)
        X, Y = np.meshgrid(np.linspace(-3, 3, n), np.linspace(-3, 3, n))
        xs, ys = np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel())
        sx, sy = _sites(args.sites)
        cases = [
            ("magnetic_laplacian", lambda m: m.magnetic_laplacian(psi, ux, uy)),
            ("magnetic_kinetic", lambda m: m.magnetic_kinetic_energy(psi, ux, uy)),
            ("vortex_phase", lambda m: m.vortex_phase(xs, ys, sx, sy)),
        ]
        for name, call in cases:
            tc = _best(lambda: call(_kernels), args.repeat)
            tp = _best(lambda: call(_kernels_py), args.repeat)
            a, b = np.asarray(call(_kernels)), np.asarray(call(_kernels_py))
            diff = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
            print(f"{name:<24}{n:>6}{1e3 * tc:>14.3f}{1e3 * tp:>14.3f}{tp / tc:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
