"""Acceptance battery: every criterion at its stated tolerance.

Each test prints one `criterion N: PASS/FAIL` line with the measured value,
its tolerance, and the runtime.  Criterion 8 (L1 growth) is exploratory:
an out-of-band slope downgrades to a warning instead of failing the build.
"""

import time
import warnings

import numpy as np
import pytest

from carnotwave import decompose, fio, flow, phase, transport, verify
from carnotwave.config import RunConfig
from carnotwave.groups import (
    Covector,
    Point,
    heisenberg,
    heisenberg_nonisotropic,
    htype_quaternion,
)
from carnotwave.rng import make_rng
from carnotwave.symbols import band_symbol, gaussian_symbol, ratio_band_symbol
from carnotwave.transport import SupportRegion

SEED = 20260808


def _report(num, name, value, tol, t0, passed=None, extra=""):
    passed = (value <= tol) if passed is None else passed
    status = "PASS" if passed else "FAIL"
    print(f"criterion {num} [{status}] {name}: {value:.3e} (tol {tol:.1e}, "
          f"{time.time() - t0:.1f}s){extra}")
    return passed


@pytest.fixture(scope="module")
def groups():
    return [heisenberg(), heisenberg_nonisotropic(), htype_quaternion()]


def test_criterion_1_flow_vs_rk4(groups):
    t0 = time.time()
    rng = make_rng(SEED, 1)
    worst = 0.0
    cases = 0
    for g in groups:
        for _ in range(6):
            t = float(rng.uniform(-8.0, 8.0))
            n = 12 if g.d2 == 1 else 10
            Y0 = np.zeros((n, 2 * g.d))
            for i in range(n):
                xi = rng.standard_normal(g.d1)
                xi *= rng.uniform(0.5, 2.0) / np.linalg.norm(xi)
                mu = rng.standard_normal(g.d2)
                mu *= rng.uniform(0.5, 2.0) / np.linalg.norm(mu)
                Y0[i, g.d1 + g.d2 : 2 * g.d1 + g.d2] = xi
                Y0[i, 2 * g.d1 + g.d2 :] = mu
            Y = flow.flow_ode_oracle_batch(g, t, Y0)
            table = flow.flow_batch(g, t, Y0[:, g.d1 + g.d2 : 2 * g.d1 + g.d2],
                                    Y0[:, 2 * g.d1 + g.d2 :])
            worst = max(
                worst,
                float(np.abs(table.xt - Y[:, : g.d1]).max()),
                float(np.abs(table.ut - Y[:, g.d1 : g.d1 + g.d2]).max()),
                float(np.abs(table.xit - Y[:, g.d1 + g.d2 : 2 * g.d1 + g.d2]).max()),
            )
            cases += n
    assert cases >= 200
    assert _report(1, f"flow vs RK4 ({cases} cases)", worst, 1e-6, t0)


def test_criterion_2_energy_symplectic(groups):
    t0 = time.time()
    rng = make_rng(SEED, 2)
    err_energy = 0.0
    err_sympl = 0.0
    for i in range(100):
        g = groups[i % 3]
        xi = rng.standard_normal(g.d1)
        xi *= rng.uniform(0.5, 2.0) / np.linalg.norm(xi)
        mu = rng.standard_normal(g.d2)
        mu *= rng.uniform(0.5, 2.0) / np.linalg.norm(mu)
        cov = Covector(xi, mu)
        t = float(rng.uniform(-8.0, 8.0))
        fp = flow.flow_origin(g, t, cov)
        H = flow.hamiltonian(g, fp.point(), fp.covector())
        err_energy = max(err_energy, abs(H - cov.xi_norm()) / cov.xi_norm())
        dxt, dxit = flow.flow_maps_fd(g, t, cov)
        xit_full = np.concatenate([fp.xi, fp.mu])
        err_sympl = max(err_sympl, float(np.abs(dxt.T @ xit_full).max()) / max(1.0, cov.xi_norm()))
        M = dxt.T @ dxit
        err_sympl = max(err_sympl, float(np.abs(M - M.T).max()) / max(1.0, float(np.abs(M).max())))
    ok = _report(2, "energy conservation", err_energy, 1e-9, t0)
    ok &= _report(2, "symplectic identities", err_sympl, 1e-6, t0)
    assert ok


def test_criterion_3_phase_density(groups):
    t0 = time.time()
    rng = make_rng(SEED, 3)
    err_fd = err_ht = err_under = 0.0
    for i in range(60):
        g = groups[i % 3]
        xi = rng.standard_normal(g.d1)
        xi *= rng.uniform(0.5, 2.0) / np.linalg.norm(xi)
        mu = rng.standard_normal(g.d2)
        mu *= rng.uniform(0.5, 2.0) / np.linalg.norm(mu)
        cov = Covector(xi, mu)
        t = float(rng.uniform(-4.0, 4.0))
        he = phase.mixed_hessian(g, t, cov)
        fd0 = phase.mixed_hessian_fd(g, t, cov)
        err_fd = max(err_fd, float(np.abs(he.phi0 - fd0).max()) / max(1.0, float(np.abs(fd0).max())))
        err_fd = max(err_fd, abs(he.det_phi - np.linalg.det(fd0)) / max(1.0, abs(he.det_phi)))
        if g.is_htype:
            det_ref, dens_ref = phase.density_htype(g, t, cov)
            err_ht = max(err_ht, abs(he.det_phi - det_ref) / max(1.0, abs(det_ref)),
                         abs(he.density - dens_ref))
        fp = flow.flow_origin(g, t, cov)
        pe = phase.phase_value(g, t, fp.point(), cov)
        err_under = max(err_under, abs(pe.value),
                        float(np.abs(pe.grad_xi).max()) / max(1.0, cov.xi_norm()))
        fdg = phase.phase_grad_xi_fd(g, t, fp.point(), cov)
        err_under = max(err_under, float(np.abs(fdg).max()) / max(1.0, cov.xi_norm()))
        xit_full = np.concatenate([fp.xi, fp.mu])
        err_under = max(err_under, float(np.abs(pe.grad_x - xit_full).max()) / max(1.0, cov.xi_norm()))
    ok = _report(3, "Phi0/det closed vs FD", err_fd, 1e-6, t0)
    ok &= _report(3, "H-type determinant", err_ht, 1e-10, t0)
    ok &= _report(3, "underline identities", err_under, 1e-8, t0)
    assert ok


def _unit_cov(rng, g, scale):
    xi = rng.standard_normal(g.d1)
    xi *= scale / np.linalg.norm(xi)
    mu = rng.standard_normal(g.d2)
    mu *= scale / np.linalg.norm(mu)
    return Covector(xi, mu)


def test_criterion_4_transport_battery(groups):
    t0 = time.time()
    rng = make_rng(SEED, 4)

    err_def = 0.0
    err_cc20 = err_cc11 = err_cck = err_ccd20 = 0.0
    for i in range(100):
        g = groups[i % 3]
        cov = _unit_cov(rng, g, rng.uniform(0.7, 2.5))
        t = float(rng.uniform(-2.0, 2.0))
        p = Point(0.7 * rng.standard_normal(g.d1), 0.7 * rng.standard_normal(g.d2))
        closed = transport.f_coeffs(g, t, p, cov)
        defin = transport.f_coeffs_definition(g, t, p, cov)
        for name in ("f20", "f11", "f10", "f01", "f00"):
            a, b = getattr(closed, name), getattr(defin, name)
            err_def = max(err_def, abs(a - b) / max(1.0, abs(b)))
        # crucial-coefficient quadruple at x = x^t for t in [-4, 4]
        t2 = float(rng.uniform(-4.0, 4.0))
        fp = flow.flow_origin(g, t2, cov)
        xin = cov.xi_norm()
        fb = transport.f_coeffs(g, t2, fp.point(), cov)
        err_cc20 = max(err_cc20, abs(fb.f20) / xin**2)
        err_cc11 = max(err_cc11, abs(fb.f11 - 2.0 * xin) / xin)
        err_cck = max(err_cck, abs(transport.k_value(g, t2, fp.point(), cov)) / xin)
        table = flow.flow_batch(g, t2, cov.xi[None, :], cov.mu[None, :])
        h = 1e-5
        for a in range(g.d1):
            e = np.zeros(g.d1)
            e[a] = h
            plus = transport.f_coeffs_from_table(g, table, (fp.x + e)[None, :])["f20"][0]
            minus = transport.f_coeffs_from_table(g, table, (fp.x - e)[None, :])["f20"][0]
            err_ccd20 = max(err_ccd20, abs(plus - minus) / (2 * h) / xin**2)
    ok = _report(4, "F closed vs definition (100 cases)", err_def, 1e-5, t0)
    ok &= _report(4, "crucial F20 underline", err_cc20, 1e-8, t0)
    ok &= _report(4, "crucial dx F20 underline", err_ccd20, 1e-6, t0)
    ok &= _report(4, "crucial F11 underline", err_cc11, 1e-8, t0)
    ok &= _report(4, "crucial K underline", err_cck, 1e-6, t0)

    # K vs F10 + R_numeric F20, 100 cases
    t1 = time.time()
    err_k = 0.0
    from carnotwave.transport import batched_amp, f_coeffs_from_table

    for i in range(100):
        g = groups[i % 3]
        cov = _unit_cov(rng, g, 2.0)
        t = float(rng.uniform(-2.0, 2.0))
        p = Point(0.5 * rng.standard_normal(g.d1), np.zeros(g.d2))

        @batched_amp
        def amp_f20(tt, X, c, g=g):
            table = flow.flow_batch(g, tt, c.xi[None, :], c.mu[None, :])
            return f_coeffs_from_table(g, table, X)["f20"]

        rf20 = transport.apply_r_numeric(g, amp_f20, t, cov, xpoints=p.x[None, :])[0]
        k_closed = transport.k_value(g, t, p, cov)
        f10 = transport.f_coeffs(g, t, p, cov).f10
        err_k = max(err_k, abs(k_closed - (f10 + rf20)) / max(1.0, abs(k_closed)))
    ok &= _report(4, "K vs F10 + R F20 (100 cases)", err_k, 1e-4, t1)

    # Lambda coefficients vs the R-composition oracle, 100 cases: each case
    # centers the Gaussian bump on the drawn covector so the compared values
    # are O(1), never tail-vacuous
    t1 = time.time()
    err_lam = 0.0
    counts = {0: 45, 1: 40, 2: 15}  # fewer on the 7-dim quaternionic group
    for gi, g in enumerate(groups):
        for _ in range(counts[gi]):
            q, cov = verify.lambda_oracle_case(g, rng)
            t = float(rng.uniform(-1.5, 1.5))
            a = transport.apply_lambda(g, q, t, cov)
            b = transport.lambda_via_r_oracle(g, q, t, cov)
            assert abs(a) > 1e-3  # the case generator keeps values meaningful
            err_lam = max(err_lam, abs(a - b) / max(1.0, abs(b)))
    ok &= _report(4, "Lambda coeffs vs R oracle (100 cases)", err_lam, 1e-4, t1)
    assert ok


def test_criterion_5_wave_identity():
    t0 = time.time()
    g = heisenberg()
    rng = make_rng(SEED, 5)
    cut = decompose.make_cutoffs()
    spec = fio.QuadratureSpec(nodes_per_dim=16, axis_counts=[64, 64, 64], mode="annulus")
    worst = 0.0
    for m in (2, 3):
        q = band_symbol(g, cut, m)
        scale = 2.0**m
        for _ in range(10):
            xi = rng.standard_normal(2)
            xi *= float(rng.uniform(1.0, 1.8)) * scale / np.linalg.norm(xi)
            mu = float(rng.uniform(0.7, 1.4)) * scale * (1.0 if rng.uniform() < 0.5 else -1.0)
            t = float(rng.uniform(0.2, 1.2))
            fp = flow.flow_origin(g, t, Covector(xi, [mu]))
            p = Point(fp.x + 0.05 * rng.standard_normal(2),
                      fp.u + 0.05 * rng.standard_normal(1))
            worst = max(worst, fio.wave_identity_residual(g, q, t, p, spec))
    assert _report(5, "wave identity residual (20 points)", worst, 5e-3, t0)


def test_criterion_6_dec_periodic():
    t0 = time.time()
    g = heisenberg()
    kappa = 1.1
    cut = decompose.make_cutoffs()
    q = ratio_band_symbol(g, cut, 2.0, kappa)
    rng = make_rng(SEED, 6)
    spec = fio.QuadratureSpec(nodes_per_dim=16, axis_counts=[64, 64, 64], mode="annulus")
    pspec = fio.QuadratureSpec(nodes_per_dim=16, axis_counts=[48, 48, 48], mode="annulus")
    worst = 0.0
    for t in (20.0, 40.0):
        pts = []
        for _ in range(5):
            ang = float(rng.uniform(0, 2 * np.pi))
            fp = flow.flow_origin(g, t, Covector([2 * np.cos(ang), 2 * np.sin(ang)], [2.0]))
            pts.append(Point(fp.x * float(rng.uniform(0.9, 1.1)), fp.u))
        res = fio.dec_periodic_check(g, q, t, pts, kappa, spec, piece_spec=pspec)
        worst = max(worst, res.discrepancy)
    assert _report(6, "large-time decomposition (10 points)", worst, 1e-3, t0)


def test_criterion_7_decomposition_structure():
    t0 = time.time()
    cut = decompose.make_cutoffs()
    s = np.concatenate([np.geomspace(1e-6, 1e6, 500), -np.geomspace(1e-6, 1e6, 500), [0.0]])
    part = float(np.abs(cut.chi0(s) + sum(cut.chi1(s / 2.0**k) for k in range(45)) - 1.0).max())
    chi_p = decompose.additive_cutoff()
    sp = np.linspace(-10, 10, 2001)
    part = max(part, float(np.abs(sum(chi_p(sp - k) for k in range(-12, 13)) - 1.0).max()))
    ds = decompose.make_directions(3, 3, seed=SEED)
    from carnotwave.rng import unit_vectors

    pts = unit_vectors(make_rng(SEED, 71), 100, 3)
    part = max(part, float(np.abs(ds.partition_sum(pts) - 1.0).max()))
    ok = _report(7, "partition-of-unity identities", part, 1e-10, t0)

    t1 = time.time()
    slope, counts = decompose.direction_count_slope(3, [2, 3, 4, 5, 6, 7], seed=SEED)
    ok &= _report(7, "direction-count slope d=3", abs(slope - 1.0), 0.3, t1,
                  extra=f" [slope={slope:.3f}, counts={counts}]")

    t1 = time.time()
    kappa = 1.1
    worst_factor = 1.0
    for d2 in (2, 3):
        ratios = []
        for mult in (16.0, 32.0, 64.0):
            T = mult * kappa**2
            dec = decompose.make_mu_sectors(d2, T, kappa)
            ratios.append(len(dec) / T ** (d2 - 1))
        worst_factor = max(worst_factor, max(ratios) / min(ratios))
    ok &= _report(7, "sector count ~ T^(d2-1)", worst_factor, 2.0, t1)
    assert ok


def test_criterion_8_l1_growth_exploratory():
    t0 = time.time()
    g = heisenberg()
    study = fio.l1_growth_study(g, [2, 3, 4, 5], 1.0, 1.5, grid_scale=1 / 3)
    dev = abs(study.slope - 1.0)
    passed = dev <= 0.4
    _report(8, "L1 growth slope (exploratory)", dev, 0.4, t0,
            passed=passed, extra=f" [slope={study.slope:.3f}]")
    if not passed:
        warnings.warn(
            f"exploratory L1 slope {study.slope:.3f} outside 1.0 +- 0.4; "
            "downgraded to a warning: this study is exploratory"
        )


def test_criterion_9_determinism(tmp_path):
    t0 = time.time()
    from carnotwave.cli import main

    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    out1.mkdir()
    out2.mkdir()
    args = ["verify", "all", "--group", "heisenberg", "--seed", "5",
            "--suites", "carnot", "flow", "phase", "decompose"]
    rc1 = main(args + ["--out", str(out1)])
    rc2 = main(args + ["--out", str(out2)])
    same = (out1 / "verify_all.json").read_bytes() == (out2 / "verify_all.json").read_bytes()
    ok = rc1 == 0 and rc2 == 0 and same
    _report(9, "verify-all determinism", 0.0 if ok else 1.0, 0.5, t0, passed=ok)
    assert ok
