"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension (Cython) is preferred; if it is missing or the
environment variable CARNOTWAVE_PURE_PYTHON is set to a non-empty value, the
vectorized numpy implementations below are used instead.  Both backends
implement identical contracts and agree to round-off; see
benchmarks/bench_kernels.py for a speed comparison.
"""

import os

import numpy as np

try:
    from . import _ckernels as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

_FORCE_PYTHON = bool(os.environ.get("CARNOTWAVE_PURE_PYTHON"))
BACKEND = "cython" if (_compiled is not None and not _FORCE_PYTHON) else "python"


def backend_name() -> str:
    return BACKEND


def _as_c(arr, dtype):
    return np.ascontiguousarray(arr, dtype=dtype)


def phase_sum_python(px, pu, xt, ut, xit, mu, absj, coeff, node_chunk: int = 1024):
    """Numpy fallback for the oscillatory-kernel reduction.

    Chunked over frequency nodes to bound memory; accumulation order is fixed,
    so results are deterministic run to run.
    """
    px = np.asarray(px, dtype=float)
    pu = np.asarray(pu, dtype=float)
    m = px.shape[0]
    n = xt.shape[0]
    out = np.zeros(m, dtype=complex)
    for lo in range(0, n, node_chunk):
        hi = min(n, lo + node_chunk)
        xt_c, ut_c = xt[lo:hi], ut[lo:hi]
        xit_c, mu_c = xit[lo:hi], mu[lo:hi]
        absj_c = absj[lo:hi]
        coeff_c = coeff[lo:hi]
        # real part of the phase
        phr = px @ xit_c.T - np.einsum("ia,ia->i", xt_c, xit_c)
        phr += pu @ mu_c.T - np.einsum("ia,ia->i", ut_c, mu_c)
        # imaginary part: quadratic form in (x - x^t)
        Ax = np.einsum("iab,pb->pia", absj_c, px)
        quad = np.einsum("pia,pa->pi", Ax, px)
        quad -= 2.0 * np.einsum("pia,ia->pi", Ax, xt_c)
        quad += np.einsum("iab,ia,ib->i", absj_c, xt_c, xt_c)
        out += np.exp(1j * phr - 0.25 * quad) @ coeff_c
    return out


def greedy_pack_python(pts, sep):
    """Pure-Python greedy maximal sep-separated subset, in stream order."""
    pts = np.asarray(pts, dtype=float)
    n, k = pts.shape
    cells = np.floor(pts / sep).astype(np.int64)
    buckets: dict = {}
    accepted = np.zeros(n, dtype=bool)
    kept: list = []
    sep2 = sep * sep
    offsets = np.stack(np.meshgrid(*([[-1, 0, 1]] * k), indexing="ij"), axis=-1).reshape(-1, k)
    for i in range(n):
        c = cells[i]
        ok = True
        for off in offsets:
            bucket = buckets.get(tuple(c + off))
            if not bucket:
                continue
            cand = pts[bucket]
            if np.min(np.sum((cand - pts[i]) ** 2, axis=1)) < sep2:
                ok = False
                break
        if ok:
            buckets.setdefault(tuple(c), []).append(i)
            kept.append(i)
            accepted[i] = True
    return accepted


def phase_sum(px, pu, xt, ut, xit, mu, absj, coeff):
    """Dispatch the oscillatory reduction to the active backend."""
    if BACKEND == "cython":
        return _compiled.phase_sum(
            _as_c(px, float), _as_c(pu, float), _as_c(xt, float), _as_c(ut, float),
            _as_c(xit, float), _as_c(mu, float), _as_c(absj, float),
            _as_c(coeff, complex),
        )
    return phase_sum_python(px, pu, xt, ut, xit, mu, absj, coeff)


def greedy_pack(pts, sep) -> np.ndarray:
    """Dispatch greedy packing to the active backend; returns a boolean mask."""
    if BACKEND == "cython":
        return _compiled.greedy_pack(_as_c(pts, float), float(sep)).astype(bool)
    return greedy_pack_python(pts, sep)
