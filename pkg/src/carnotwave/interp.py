"""Tensor Chebyshev-Lobatto interpolation with barycentric evaluation.

Backs the memoized parametrix amplitude iterates: values live on a tensor
grid (time axis x frequency axes), evaluation at scattered points uses the
barycentric formula per axis, and exact polynomial differentiation along an
axis is available through the standard spectral differentiation matrix.
"""

import numpy as np


def lobatto_nodes(a: float, b: float, n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("need at least two nodes per axis")
    k = np.arange(n)
    x = np.cos(np.pi * k / (n - 1))[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def _bary_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def diff_matrix(a: float, b: float, n: int) -> np.ndarray:
    """Spectral differentiation matrix on the Lobatto nodes of [a, b]."""
    x = lobatto_nodes(a, b, n)
    c = _bary_weights(n)
    X = x[:, None] - x[None, :]
    np.fill_diagonal(X, 1.0)
    D = (c[None, :] / c[:, None]) / X
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def _bary_basis(x: np.ndarray, nodes: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Barycentric basis matrix B with B[m, j] the weight of node j at x[m]."""
    diff = x[:, None] - nodes[None, :]
    exact = np.abs(diff) < 1e-14
    diff = np.where(exact, 1.0, diff)
    ratios = w[None, :] / diff
    B = ratios / ratios.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        B[hit] = 0.0
        B[hit, np.argmax(exact[hit], axis=1)] = 1.0
    return B


class TensorChebyshev:
    """Polynomial interpolant of complex values on a tensor Lobatto grid."""

    def __init__(self, bounds, counts, values=None):
        self.bounds = [tuple(map(float, b)) for b in bounds]
        self.counts = [int(n) for n in counts]
        self.axes = [lobatto_nodes(a, b, n) for (a, b), n in zip(self.bounds, self.counts)]
        self.weights = [_bary_weights(n) for n in self.counts]
        self.values = None
        if values is not None:
            self.set_values(values)

    @property
    def ndim(self) -> int:
        return len(self.counts)

    def grid_points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([grid.ravel() for grid in grids], axis=1)

    def set_values(self, values):
        values = np.asarray(values, dtype=complex)
        self.values = values.reshape(self.counts)

    def __call__(self, pts: np.ndarray, chunk: int = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        m = pts.shape[0]
        if chunk is None:
            # keep the first contraction's intermediate around ~32 MB
            per_query = int(np.prod(self.counts[1:])) if self.ndim > 1 else 1
            chunk = max(16, min(m, int(2e6 / max(per_query, 1)) + 1))
        out = np.empty(m, dtype=complex)
        for lo in range(0, m, chunk):
            hi = min(m, lo + chunk)
            nq = hi - lo
            B = _bary_basis(pts[lo:hi, 0], self.axes[0], self.weights[0])
            # first contraction is a plain matrix product (BLAS)
            block = np.tensordot(B, self.values, axes=(1, 0))
            for ax in range(1, self.ndim):
                B = _bary_basis(pts[lo:hi, ax], self.axes[ax], self.weights[ax])
                flat = block.reshape(nq, self.counts[ax], -1)
                block = np.einsum("mj,mjr->mr", B, flat).reshape(
                    (nq,) + tuple(self.counts[ax + 1 :])
                )
            out[lo:hi] = block.reshape(nq)
        return out

    def collapsed_axis0(self, x: float) -> "TensorChebyshev":
        """New interpolant over the remaining axes with axis 0 fixed at x."""
        out = TensorChebyshev(self.bounds[1:], self.counts[1:])
        out.values = self.collapse_axis0(x)
        return out

    def derivative(self, axis: int) -> "TensorChebyshev":
        """Exact derivative along one axis as a new interpolant."""
        D = diff_matrix(*self.bounds[axis], self.counts[axis])
        vals = np.moveaxis(self.values, axis, 0)
        dvals = np.tensordot(D, vals, axes=(1, 0))
        dvals = np.moveaxis(dvals, 0, axis)
        out = TensorChebyshev(self.bounds, self.counts)
        out.values = dvals
        return out

    def collapse_axis0(self, x: float) -> np.ndarray:
        """Evaluate along axis 0 only, returning the remaining value tensor."""
        B = _bary_basis(np.array([float(x)]), self.axes[0], self.weights[0])
        return np.tensordot(B[0], self.values, axes=(0, 0))


def _cheb_coeff_matrix(n: int) -> np.ndarray:
    """Map Lobatto node values (ascending nodes) to Chebyshev coefficients."""
    j = np.arange(n)
    k = np.arange(n)
    # ascending nodes are cos(pi (n-1-j)/(n-1))
    theta = np.pi * (n - 1 - j) / (n - 1)
    M = np.cos(np.outer(k, theta)) * (2.0 / (n - 1))
    M[:, 0] *= 0.5
    M[:, -1] *= 0.5
    M[0] *= 0.5
    M[-1] *= 0.5
    return M


def integration_from_zero_matrix(a: float, b: float, n: int) -> np.ndarray:
    """Matrix M with (M v)_i = integral from 0 to node_i of the interpolant of v.

    Nodes are the ascending Lobatto nodes of [a, b]; 0 must lie inside [a, b].
    Exact for polynomials up to the grid degree.
    """
    if not (a <= 0.0 <= b):
        raise ValueError("0 must lie inside [a, b]")
    C = _cheb_coeff_matrix(n)
    # antiderivative in coefficient space (unit interval)
    B = np.zeros((n + 1, n))
    for k in range(1, n + 1):
        if k - 1 < n:
            B[k, k - 1] += 1.0 / (2.0 * k)
        if k + 1 < n:
            B[k, k + 1] -= 1.0 / (2.0 * k)
    B[1, 0] = 1.0  # T_0 integrates to T_1 exactly
    # evaluation of T_k at the nodes and at the preimage of 0
    nodes = lobatto_nodes(a, b, n)
    s_nodes = (2.0 * nodes - (a + b)) / (b - a)
    s_zero = (0.0 - 0.5 * (a + b)) / (0.5 * (b - a))
    kk = np.arange(n + 1)
    Tn = np.cos(np.outer(np.arccos(np.clip(s_nodes, -1, 1)), kk))
    T0 = np.cos(kk * np.arccos(np.clip(s_zero, -1, 1)))
    return 0.5 * (b - a) * ((Tn - T0) @ B @ C)
