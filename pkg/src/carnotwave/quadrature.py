"""Gauss-Legendre rules and tensor-product grids."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=256)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, n: int):
    """Nodes and weights for the Gauss-Legendre rule with n points on [a, b]."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def tensor_rule(bounds, nodes_per_dim):
    """Tensor Gauss-Legendre grid over a box.

    bounds is a sequence of (lo, hi) pairs, nodes_per_dim an int or a sequence
    of per-axis counts.  Returns (points (N, d), weights (N,)).
    """
    bounds = list(bounds)
    d = len(bounds)
    if np.isscalar(nodes_per_dim):
        counts = [int(nodes_per_dim)] * d
    else:
        counts = [int(n) for n in nodes_per_dim]
    axes, wts = [], []
    for (lo, hi), n in zip(bounds, counts):
        x, w = gauss_legendre(lo, hi, n)
        axes.append(x)
        wts.append(w)
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([grid.ravel() for grid in grids], axis=1)
    weight = wts[0]
    for w in wts[1:]:
        weight = np.multiply.outer(weight, w)
    return points, weight.ravel()


def integrate_gl(f, a: float, b: float, n: int):
    """Gauss-Legendre quadrature of a scalar or vector valued callable on [a, b]."""
    x, w = gauss_legendre(a, b, n)
    vals = np.asarray([f(t) for t in x])
    return np.tensordot(w, vals, axes=(0, 0))
