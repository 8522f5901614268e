"""Fixed-node quadrature rules used by the radial integrals.

Gauss-Legendre handles smooth integrands; the tanh-sinh (double exponential)
rule is used where an integrand has algebraic endpoint singularities, e.g.
where a circle becomes tangent to the edge of the TF support.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def tanh_sinh(n: int, h: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the tanh-sinh rule on [-1, 1].

    ``n`` nodes are spread symmetrically over ``|t| <= t_max`` with
    ``t_max`` chosen so the outermost weight is below double precision.
    """
    t_max = 3.2
    if h is None:
        h = 2 * t_max / (n - 1)
    t = np.linspace(-t_max, t_max, n)
    u = 0.5 * np.pi * np.sinh(t)
    x = np.tanh(u)
    w = h * 0.5 * np.pi * np.cosh(t) / np.cosh(u) ** 2
    # nodes rounding to +-1 carry no weight and would hit the singularity
    keep = np.abs(x) < 1.0
    x, w = x[keep], w[keep]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def map_nodes(a, b, nodes, weights):
    """Affine map of a rule on [-1, 1] to [a, b] (broadcasts over a, b)."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def composite_gauss(f, breakpoints, n: int = 24, panels: int = 1) -> float:
    """Integrate a vectorized ``f`` over consecutive breakpoint intervals."""
    x, w = gauss_legendre(n)
    total = 0.0
    edges = np.asarray(breakpoints, dtype=float)
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        sub = np.linspace(a, b, panels + 1)
        xs, ws = map_nodes(sub[:-1], sub[1:], x, w)
        total += float(np.sum(ws * f(xs)))
    return total
