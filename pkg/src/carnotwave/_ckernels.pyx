# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: oscillatory-kernel reduction and greedy sphere packing.

The Python fallbacks in kernels.py implement the same contracts; which
implementation is active is decided once at import time.
"""

import numpy as np

from libc.math cimport cos, exp, floor, sin

DEF MAX_DIM = 16


def phase_sum(
    double[:, ::1] px, double[:, ::1] pu,
    double[:, ::1] xt, double[:, ::1] ut,
    double[:, ::1] xit, double[:, ::1] mu,
    double[:, :, ::1] absj, double complex[::1] coeff,
):
    """Sum over frequency nodes of coeff * exp(i * phase) at a batch of points.

    phase = (x - x^t).xi^t + (u - u^t).mu + (i/4) <|J_mu|(x - x^t), x - x^t>
    with per-node flow data (xt, ut, xit, mu, absj).  Returns a complex array
    with one entry per point row.
    """
    cdef Py_ssize_t m = px.shape[0]
    cdef Py_ssize_t n = xt.shape[0]
    cdef Py_ssize_t d1 = px.shape[1]
    cdef Py_ssize_t d2 = pu.shape[1]
    if d1 > MAX_DIM or d2 > MAX_DIM:
        raise ValueError("layer dimension exceeds compiled kernel limit")
    out_arr = np.zeros(m, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t p, i, a, b
    cdef double dx[MAX_DIM]
    cdef double phr, phim, row, damp, er, ei, cr, ci, sr, si
    cdef double complex c
    for p in range(m):
        sr = 0.0
        si = 0.0
        for i in range(n):
            phr = 0.0
            for a in range(d1):
                dx[a] = px[p, a] - xt[i, a]
                phr += dx[a] * xit[i, a]
            for a in range(d2):
                phr += (pu[p, a] - ut[i, a]) * mu[i, a]
            phim = 0.0
            for a in range(d1):
                row = 0.0
                for b in range(d1):
                    row += absj[i, a, b] * dx[b]
                phim += dx[a] * row
            damp = exp(-0.25 * phim)
            er = damp * cos(phr)
            ei = damp * sin(phr)
            c = coeff[i]
            cr = c.real
            ci = c.imag
            sr += er * cr - ei * ci
            si += er * ci + ei * cr
        out[p] = sr + 1j * si
    return out_arr


def greedy_pack(double[:, ::1] pts, double sep):
    """Greedy maximal sep-separated subset of a point stream, in stream order.

    Returns a uint8 mask over rows.  Uses a hashed cell grid; hash collisions
    only cost extra distance checks, never correctness.
    """
    cdef Py_ssize_t N = pts.shape[0]
    cdef Py_ssize_t k = pts.shape[1]
    if k > 8:
        raise ValueError("dimension exceeds compiled kernel limit")
    cdef double sep2 = sep * sep
    cdef Py_ssize_t nslots = 1
    while nslots < 4 * N + 8:
        nslots <<= 1
    cdef long long mask = nslots - 1

    head_arr = np.full(nslots, -1, dtype=np.int64)
    next_arr = np.full(max(N, 1), -1, dtype=np.int64)
    out_arr = np.zeros(N, dtype=np.uint8)
    cdef long long[::1] head = head_arr
    cdef long long[::1] nxt = next_arr
    cdef unsigned char[::1] out = out_arr

    cdef long long[8] primes
    primes[0] = 73856093
    primes[1] = 19349663
    primes[2] = 83492791
    primes[3] = 15485863
    primes[4] = 49979687
    primes[5] = 86028121
    primes[6] = 32452843
    primes[7] = 67867967

    cdef long long cell[8]
    cdef long long ncell[8]
    cdef Py_ssize_t idx, d, j, t, noff
    cdef long long h, ptr
    cdef double dist2, diff
    cdef bint ok
    cdef Py_ssize_t n_offsets = 1
    for d in range(k):
        n_offsets *= 3

    for idx in range(N):
        for d in range(k):
            cell[d] = <long long> floor(pts[idx, d] / sep)
        ok = True
        for noff in range(n_offsets):
            t = noff
            for d in range(k):
                ncell[d] = cell[d] + (t % 3) - 1
                t //= 3
            h = 0
            for d in range(k):
                h ^= ncell[d] * primes[d]
            h &= mask
            ptr = head[h]
            while ptr >= 0:
                dist2 = 0.0
                for d in range(k):
                    diff = pts[idx, d] - pts[ptr, d]
                    dist2 += diff * diff
                if dist2 < sep2:
                    ok = False
                    break
                ptr = nxt[ptr]
            if not ok:
                break
        if ok:
            h = 0
            for d in range(k):
                h ^= cell[d] * primes[d]
            h &= mask
            nxt[idx] = head[h]
            head[h] = idx
            out[idx] = 1
    return out_arr
