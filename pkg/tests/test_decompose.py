import numpy as np
import pytest

from carnotwave.decompose import (
    additive_cutoff,
    direction_count_slope,
    make_cutoffs,
    make_directions,
    make_mu_sectors,
    mu_shear,
    mu_unshear,
    shear_k_window,
    sheared_symbol,
)
from carnotwave.errors import ZeroFrequency, ZeroTime
from carnotwave.flow import unit_skew_eigdata
from carnotwave.groups import Covector
from carnotwave.rng import make_rng, unit_vectors
from carnotwave.symbols import ratio_band_symbol


def test_dyadic_partition_identity():
    cut = make_cutoffs()
    s = np.concatenate([
        np.geomspace(1e-6, 1e6, 400),
        -np.geomspace(1e-6, 1e6, 400),
        [0.0, 1.0, -1.0, 0.5, 2.0],
    ])
    kmax = 45
    total = cut.chi0(s) + sum(cut.chi1(s / 2.0**k) for k in range(kmax))
    assert np.max(np.abs(total - 1.0)) <= 1e-12


def test_chi1_support_and_shape():
    cut = make_cutoffs()
    assert cut.chi1(3.0) == 0.0
    assert cut.chi1(0.4) == 0.0
    s = np.linspace(-3, 3, 401)
    vals = cut.chi1(s)
    assert np.all(vals >= 0)
    assert np.max(np.abs(vals - cut.chi1(-s))) == 0.0
    nz = s[vals > 0]
    assert np.all((np.abs(nz) >= 0.5) & (np.abs(nz) <= 2.0))


def test_adjacent_scales_cover():
    cut = make_cutoffs()
    s = np.linspace(0.9, 1.1, 50)
    total = cut.chi1(s) + cut.chi1(2 * s) + cut.chi1(s / 2)
    assert np.max(np.abs(total - 1.0)) <= 1e-13


def test_chi1_tilde_identity():
    cut = make_cutoffs()
    s = np.linspace(-4.5, 4.5, 901)
    assert np.max(np.abs(cut.chi1_tilde(s) * cut.chi1(s) - cut.chi1(s))) <= 1e-15


def test_additive_cutoff_partition():
    chi = additive_cutoff()
    s = np.linspace(-10, 10, 2001)
    total = sum(chi(s - k) for k in range(-12, 13))
    assert np.max(np.abs(total - 1.0)) <= 1e-12
    assert np.max(np.abs(chi(s) - chi(-s))) <= 1e-15
    assert np.all((chi(s) >= 0) & (chi(s) <= 1))
    assert chi(np.array([1.5]))[0] == 0.0


def test_directions_basic():
    ds = make_directions(2, 0)
    assert len(ds) >= 4
    pts = unit_vectors(make_rng(2, 1), 64, 2)
    sums = ds.partition_sum(pts)
    assert np.max(np.abs(sums - 1.0)) <= 1e-10


def test_directions_support_scan():
    ds = make_directions(3, 2)
    rng = make_rng(9, 4)
    pts = unit_vectors(rng, 40, 3)
    for row, (idx, vals) in zip(pts, ds.weights_at(pts)):
        dists = np.linalg.norm(ds.directions - row, axis=1)
        inside = np.nonzero(dists < ds.bump_radius)[0]
        assert set(idx).issubset(set(inside))
        assert abs(vals.sum() - 1.0) <= 1e-10
        # every direction strictly within the bump radius gets weight
        strict = np.nonzero(dists < 0.98 * ds.bump_radius)[0]
        assert set(strict).issubset(set(idx))


def test_direction_count_slope_d3():
    slope, counts = direction_count_slope(3, [2, 3, 4, 5])
    assert counts == sorted(counts)
    assert abs(slope - 1.0) <= 0.3


def test_direction_count_slope_d2():
    slope, _ = direction_count_slope(2, [2, 3, 4, 5, 6])
    assert abs(slope - 0.5) <= 0.3


def test_mu_sectors_counts_and_partition():
    kappa = 1.1
    for d2 in (2, 3):
        ratios = []
        for mult in (16.0, 32.0, 64.0):
            T = mult * kappa**2
            dec = make_mu_sectors(d2, T, kappa)
            ratios.append(len(dec) / T ** (d2 - 1))
        assert max(ratios) / min(ratios) <= 2.0
    dec = make_mu_sectors(2, 16 * kappa**2, kappa)
    mus = unit_vectors(make_rng(3, 3), 32, 2) * 2.5
    sums = dec.sector_weights_sum(mus)
    assert np.max(np.abs(sums - 1.0)) <= 1e-10


def test_mu_sector_support(quat):
    kappa = 1.1
    T = 16 * kappa**2
    dec = make_mu_sectors(3, T, kappa)
    rng = make_rng(11, 2)
    mus = unit_vectors(rng, 200, 3)
    out = dec._weights.weights_at(mus)
    c_over_T = dec.c / T
    for mu, (idx, vals) in zip(mus, out):
        for i, w in zip(idx, vals):
            if w <= 0:
                continue
            v = dec.sectors[i]
            par = mu @ v
            perp = np.linalg.norm(mu - par * v)
            assert par > 0
            assert perp <= c_over_T + 1e-12


def test_mu_shear_roundtrip(hei, rng):
    cov = Covector([1.2, -0.4], [0.8])
    out = mu_shear(hei, 1.0, 0, np.array([1.0]), cov)
    assert np.allclose(out.mu, cov.mu) and np.allclose(out.xi, cov.xi)
    # mu = 0, |xi| = 1, t = 2k gives mu' = v
    out = mu_shear(hei, 6.0, 3, np.array([1.0]), Covector([1.0, 0.0], [0.0]))
    assert np.allclose(out.mu, [1.0])
    for _ in range(10):
        cov = Covector(rng.standard_normal(2), rng.standard_normal(1))
        t = float(rng.uniform(0.5, 30.0))
        k = int(rng.integers(1, 9))
        v = np.array([1.0 if rng.uniform() < 0.5 else -1.0])
        back = mu_unshear(hei, t, k, v, mu_shear(hei, t, k, v, cov))
        assert np.max(np.abs(back.mu - cov.mu)) <= 1e-14 * max(1, np.max(np.abs(cov.mu)))
    with pytest.raises(ZeroTime):
        mu_shear(hei, 0.0, 1, np.array([1.0]), cov)
    with pytest.raises(ZeroFrequency):
        mu_shear(hei, 1.0, 1, np.array([1.0]), Covector([0.0, 0.0], [1.0]))


def test_sheared_symbol_window_and_support(hei):
    cut = make_cutoffs()
    kappa = 1.1
    t = 20.0
    q = ratio_band_symbol(hei, cut, 2.0, kappa)
    dec = make_mu_sectors(1, t, kappa)
    k_lo, k_hi = shear_k_window(t, kappa)
    # a k outside the admissible window gives the zero symbol
    k_out = int(np.ceil(k_hi)) + 3
    sym = sheared_symbol(hei, q, t, k_out, np.array([1.0]), dec)
    rng = make_rng(17, 1)
    xi = rng.uniform(-4, 4, size=(400, 2))
    xi = xi[np.linalg.norm(xi, axis=1) > 0.2]
    mu_t = rng.uniform(-8, 8, size=(xi.shape[0], 1))
    assert np.max(np.abs(sym.eval(t, xi, mu_t))) == 0.0
    # an admissible k produces nonzero values, all within |mu| <= 5|xi|/2
    k_in = int(round(t / 2.0))
    sym = sheared_symbol(hei, q, t, k_in, np.array([1.0]), dec)
    vals = sym.eval(t, xi, mu_t)
    assert np.max(np.abs(vals)) > 0.0
    nz = np.abs(vals) > 0
    assert np.all(
        np.linalg.norm(mu_t[nz], axis=1) <= 2.5 * np.linalg.norm(xi[nz], axis=1) + 1e-12
    )


def test_sheared_density_magnitude(hei):
    # |t|^(-1/2) normalization keeps the sheared density O(1) on its support
    cut = make_cutoffs()
    kappa = 1.1
    q = ratio_band_symbol(hei, cut, 2.0, kappa)
    mags = []
    for t in (16 * kappa**2, 32 * kappa**2, 64 * kappa**2):
        dec = make_mu_sectors(1, t, kappa)
        k = int(round(t / 2.0))
        sym = sheared_symbol(hei, q, t, k, np.array([1.0]), dec)
        xi = np.array([[2.0, 0.0], [1.5, 0.5], [0.0, 2.2]])
        mu_t = np.array([[0.4], [-0.6], [0.2]])
        from carnotwave.flow import flow_batch

        vals = sym.eval(t, xi, mu_t)
        live = np.abs(vals) > 0
        if live.any():
            mus = (2.0 * k * np.linalg.norm(xi[live], axis=1)[:, None] + mu_t[live]) / t
            dens = np.abs(flow_batch(hei, t, xi[live], mus).dphi) / np.sqrt(t)
            mags.extend(dens.tolist())
    mags = np.asarray(mags)
    assert mags.size > 0
    assert np.all(mags > 0.05) and np.all(mags < 5.0)


def test_exp_shift_derivative_bound(hei, quat):
    # FD mu-derivative of exp(J_{kv} + J_mu) stays bounded as k grows
    for g in (hei, quat):
        rng = make_rng(23, g.d2)
        v = np.zeros(g.d2)
        v[0] = 1.0
        h = 1e-6
        for k in (2.0, 8.0, 32.0):
            for _ in range(3):
                mu = rng.standard_normal(g.d2)

                def expj(m):
                    from carnotwave.groups import j_mu

                    J = j_mu(g, k * v + m)
                    a, V = np.linalg.eigh(1j * J.astype(complex))
                    return (V * np.exp(-1j * a)) @ V.conj().T

                for comp in range(g.d2):
                    e = np.zeros(g.d2)
                    e[comp] = h
                    D = (expj(mu + e) - expj(mu - e)) / (2 * h)
                    assert np.linalg.norm(D, 2) <= 10.0
