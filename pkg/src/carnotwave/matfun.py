"""Matrix functions of real skew-symmetric matrices.

A real skew-symmetric J is normal with purely imaginary spectrum, and iJ is
Hermitian, so a single (batched) Hermitian eigendecomposition gives every
matrix function exactly: J = V diag(-i a) V^H with a real, and
f(J) = V diag(f(-i a)) V^H.  Repeated and zero eigenvalues need no special
handling on this route.
"""

import numpy as np


def skew_eig(J: np.ndarray):
    """Eigendecomposition of skew-symmetric J (possibly a stack).

    Returns (a, V) with a real such that J = V @ diag(-1j * a) @ V^H.
    """
    a, V = np.linalg.eigh(1j * np.asarray(J, dtype=complex))
    return a, V


def apply_skew_fun(a: np.ndarray, V: np.ndarray, fvals: np.ndarray) -> np.ndarray:
    """Assemble V diag(fvals) V^H for stacked eigendata."""
    return np.einsum("...ij,...j,...kj->...ik", V, fvals, V.conj())


def skew_fun(J: np.ndarray, f) -> np.ndarray:
    """f(J) for skew-symmetric J; f receives the complex eigenvalues -i*a."""
    a, V = skew_eig(J)
    return apply_skew_fun(a, V, f(-1j * a))


def skew_abs_from_eig(a: np.ndarray, V: np.ndarray) -> np.ndarray:
    """|J| = (-J^2)^(1/2) from skew eigendata; result is real symmetric PSD."""
    return apply_skew_fun(a, V, np.abs(a) + 0j).real


def real_part_checked(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Real part of a matrix that is real up to round-off."""
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M.imag)) > tol * scale:
        raise ValueError("matrix has a non-negligible imaginary part")
    return np.ascontiguousarray(M.real)
