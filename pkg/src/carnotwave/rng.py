"""Seeded counter-based random streams.

All randomized sampling in the package flows through :func:`make_rng`, so a
single integer seed fully determines every run.  Philox is counter-based, and
distinct subkeys give independent streams from the same master seed.
"""

import numpy as np


def make_rng(seed: int, *subkeys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in subkeys))
    return np.random.Generator(np.random.Philox(ss))


def unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n quasi-uniform unit vectors in R^dim, rows normalized, degenerate draws resampled."""
    v = rng.standard_normal((n, dim))
    norms = np.linalg.norm(v, axis=1)
    bad = norms < 1e-12
    while bad.any():
        v[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(v, axis=1)
        bad = norms < 1e-12
    return v / norms[:, None]
