import numpy as np
import pytest

from carnotwave.errors import OutsideOmega, ZeroFrequency
from carnotwave.flow import flow_origin
from carnotwave.groups import Covector, Point
from carnotwave.phase import (
    density_htype,
    full_hessian_fd,
    mixed_hessian,
    mixed_hessian_fd,
    phase_grad_xi_fd,
    phase_value,
    stationarity_check,
)

from conftest import random_covector, random_point


def test_phase_error_conditions(hei, free3):
    with pytest.raises(ZeroFrequency):
        phase_value(hei, 1.0, Point([0, 0], [0]), Covector([0.0, 0.0], [1.0]))
    with pytest.raises(OutsideOmega):
        phase_value(hei, 1.0, Point([0, 0], [0]), Covector([1.0, 0.0], [0.0]))
    with pytest.raises(OutsideOmega):
        mixed_hessian(free3, 1.0, Covector([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]))


def test_phase_t0_formula(metivier_groups, rng):
    from carnotwave.groups import abs_j_mu

    for g in metivier_groups:
        cov = random_covector(rng, g)
        p = random_point(rng, g)
        pe = phase_value(g, 0.0, p, cov)
        expected = p.x @ cov.xi + p.u @ cov.mu + 0.25j * (p.x @ abs_j_mu(g, cov.mu) @ p.x)
        assert abs(pe.value - expected) <= 1e-12 * max(1.0, abs(expected))


def test_underline_identities(metivier_groups, rng):
    # at x = x^t: phi = 0, d_xi phi = 0 (checked by direct FD), grad_x phi = xi^t
    for g in metivier_groups:
        for _ in range(3):
            cov = random_covector(rng, g)
            t = float(rng.uniform(-3.0, 3.0))
            fp = flow_origin(g, t, cov)
            p = fp.point()
            pe = phase_value(g, t, p, cov)
            assert abs(pe.value) <= 1e-8
            assert np.max(np.abs(pe.grad_xi)) <= 1e-8 * max(1.0, cov.xi_norm())
            xit = np.concatenate([fp.xi, fp.mu])
            assert np.max(np.abs(pe.grad_x - xit)) <= 1e-8 * max(1.0, cov.xi_norm())
            fd_grad = phase_grad_xi_fd(g, t, p, cov)
            assert np.max(np.abs(fd_grad)) <= 1e-8 * max(1.0, cov.xi_norm())


def test_im_phase_nonnegative_and_definite(metivier_groups, rng):
    for g in metivier_groups:
        for _ in range(200):
            cov = random_covector(rng, g)
            p = random_point(rng, g)
            t = float(rng.uniform(-2.0, 2.0))
            pe = phase_value(g, t, p, cov)
            assert pe.im_part >= 0.0
            fp = flow_origin(g, t, cov)
            if np.linalg.norm(p.x - fp.x) > 1e-8:
                # Metivier: |J_mu| is definite, so Im phi > 0 off the flow
                assert pe.im_part > 0.0


def test_gradient_formula_vs_fd(metivier_groups, rng):
    for g in metivier_groups:
        cov = random_covector(rng, g)
        p = random_point(rng, g, scale=0.5)
        t = 0.9
        pe = phase_value(g, t, p, cov)
        fd_grad = phase_grad_xi_fd(g, t, p, cov)
        assert np.max(np.abs(pe.grad_xi - fd_grad)) <= 1e-6 * max(1.0, np.max(np.abs(fd_grad)))


def test_hessian_t0_identity(metivier_groups, rng):
    for g in metivier_groups:
        cov = random_covector(rng, g)
        he = mixed_hessian(g, 0.0, cov)
        assert np.allclose(he.phi0, np.eye(g.d1), atol=1e-12)
        assert he.det_phi == pytest.approx(1.0)
        assert he.density == pytest.approx(1.0)


def test_hessian_closed_vs_fd(metivier_groups, rng):
    for g in metivier_groups:
        for _ in range(3):
            cov = random_covector(rng, g)
            t = float(rng.uniform(-4.0, 4.0))
            he = mixed_hessian(g, t, cov)
            fd_phi0 = mixed_hessian_fd(g, t, cov)
            assert np.max(np.abs(he.phi0 - fd_phi0)) <= 1e-6 * max(1.0, np.max(np.abs(fd_phi0)))
            det_fd = np.linalg.det(fd_phi0)
            assert abs(he.det_phi - det_fd) <= 1e-6 * max(1.0, abs(det_fd))


def test_det_formula_vs_phi0_det(metivier_groups, rng):
    for g in metivier_groups:
        for _ in range(5):
            cov = random_covector(rng, g)
            t = float(rng.uniform(-4.0, 4.0))
            he = mixed_hessian(g, t, cov)
            det_direct = np.linalg.det(he.phi0)
            assert abs(he.det_phi - det_direct) <= 1e-9 * max(1.0, abs(det_direct))


def test_htype_determinant_closed_form(quat, hei, rng):
    # det Phi = exp(-i theta d1) (1 + i theta) on H-type groups
    for g in (quat, hei):
        for _ in range(5):
            cov = random_covector(rng, g)
            t = float(rng.uniform(-4.0, 4.0))
            he = mixed_hessian(g, t, cov)
            det_ref, dens_ref = density_htype(g, t, cov)
            assert abs(he.det_phi - det_ref) <= 1e-10 * max(1.0, abs(det_ref))
            assert abs(he.density - dens_ref) <= 1e-10


def test_htype_frozen_value():
    # d1 = 2, theta = 1: det = e^{-2i}(1 + i), density = e^{-i} sqrt(1 + i)
    from carnotwave.groups import heisenberg

    g = heisenberg()
    cov = Covector([1.0, 0.0], [2.0])  # t = 1 -> theta = 1
    he = mixed_hessian(g, 1.0, cov)
    assert he.det_phi == pytest.approx(np.exp(-2j) * (1 + 1j), abs=1e-12)
    assert he.density == pytest.approx(np.exp(-1j) * np.sqrt(1 + 1j), abs=1e-12)


def test_density_is_principal_sqrt(metivier_groups, rng):
    for g in metivier_groups:
        cov = random_covector(rng, g)
        for t in np.linspace(-6, 6, 13):
            he = mixed_hessian(g, float(t), cov)
            assert abs(he.density**2 - he.det_phi) <= 1e-12 * max(1.0, abs(he.det_phi))
    # continuity toward t = 0
    he_small = mixed_hessian(metivier_groups[0], 1e-9, random_covector(rng, metivier_groups[0]))
    assert abs(he_small.density - 1.0) <= 1e-6


def test_euler_homogeneity(metivier_groups, rng):
    for g in metivier_groups:
        cov = random_covector(rng, g)
        p = random_point(rng, g)
        t = 1.1
        r = 2.7
        v1 = phase_value(g, t, p, cov).value
        v2 = phase_value(g, t, p, Covector(r * cov.xi, r * cov.mu)).value
        assert abs(r * v1 - v2) <= 1e-11 * max(1.0, abs(v2))


def test_full_hessian_block_structure(hei_aniso, rng):
    g = hei_aniso
    cov = random_covector(rng, g)
    p = random_point(rng, g, scale=0.5)
    Phi = full_hessian_fd(g, 1.2, p, cov)
    d1, d2 = g.d1, g.d2
    assert np.max(np.abs(Phi[d1:, :d1])) <= 1e-7
    assert np.max(np.abs(Phi[d1:, d1:] - np.eye(d2))) <= 1e-7
    # the upper-left block agrees with the closed form at x = x^t
    fp = flow_origin(g, 1.2, cov)
    Phi_under = full_hessian_fd(g, 1.2, fp.point(), cov)
    he = mixed_hessian(g, 1.2, cov)
    assert np.max(np.abs(Phi_under[:d1, :d1] - he.phi0)) <= 1e-6


def test_stationarity_check(hei, rng):
    cov = Covector([1.0, 0.4], [0.8])
    t = 0.7
    fp = flow_origin(hei, t, cov)
    assert stationarity_check(hei, t, fp.point(), cov, tol=1e-8)
    shifted = Point(fp.x + np.array([0.1, 0.0]), fp.u)
    assert not stationarity_check(hei, t, shifted, cov, tol=1e-4)
    shifted_u = Point(fp.x, fp.u + 0.1)
    assert not stationarity_check(hei, t, shifted_u, cov, tol=1e-4)
