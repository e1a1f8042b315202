"""Central finite differences with one Richardson extrapolation level.

Used wherever a derivative oracle is needed: Jacobians of the flow
maps, definition-based transport coefficients, and symbol derivatives inside
the transport operators.
"""

import numpy as np

REL_STEP_XI = 1e-5   # relative step for xi/x derivatives
STEP_T = 1e-4        # absolute step for t derivatives
STEP_NESTED = 1e-3   # coarser step for nested differences (R^2, outer divergences)


def _steps(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def central(f, x: float, h: float):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def richardson(f, x: float, h: float):
    """Central difference at steps h and h/2 combined to O(h^4)."""
    d1 = central(f, x, h)
    d2 = central(f, x, 0.5 * h)
    return (4.0 * d2 - d1) / 3.0


def second(f, x: float, h: float):
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def second_5pt(f, x: float, h: float):
    """Five-point second derivative, O(h^4)."""
    return (
        -f(x + 2 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2 * h)
    ) / (12.0 * h * h)


def jacobian(f, x: np.ndarray, rel: float = REL_STEP_XI, use_richardson: bool = True) -> np.ndarray:
    """Jacobian of a vector-valued map; column j is the derivative in x_j.

    f maps a 1-d array to a (possibly complex) array; the output has shape
    f(x).shape + (len(x),).
    """
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = 1.0

        def g(s, e=e):
            return np.asarray(f(x + s * e))

        if use_richardson:
            d1 = (g(h[j]) - g(-h[j])) / (2.0 * h[j])
            d2 = (g(0.5 * h[j]) - g(-0.5 * h[j])) / h[j]
            cols.append((4.0 * d2 - d1) / 3.0)
        else:
            cols.append((g(h[j]) - g(-h[j])) / (2.0 * h[j]))
    return np.stack(cols, axis=-1)


def gradient(f, x: np.ndarray, rel: float = REL_STEP_XI, use_richardson: bool = True) -> np.ndarray:
    """Gradient of a scalar map as a 1-d array."""
    return jacobian(lambda y: np.asarray(f(y)), x, rel=rel, use_richardson=use_richardson)
