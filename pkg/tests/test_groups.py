import json

import numpy as np
import pytest

from carnotwave.errors import RankDrop
from carnotwave.groups import (
    Covector,
    Group2Step,
    Point,
    abs_j_mu,
    classify,
    cotangent_translate,
    cotangent_translate_inv,
    dilate,
    group_from_dict,
    group_inverse,
    group_multiply,
    group_to_dict,
    j_mu,
    kernel_projector,
    kernel_projector_svd,
)
from carnotwave.rng import make_rng, unit_vectors

from conftest import random_point


def test_defining_identity_all_groups(all_groups, rng):
    for g in all_groups:
        for _ in range(20):
            mu = rng.standard_normal(g.d2)
            x = rng.standard_normal(g.d1)
            y = rng.standard_normal(g.d1)
            lhs = float(j_mu(g, mu) @ x @ y)
            rhs = float(mu @ g.lie_bracket(x, y))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_j_mu_heisenberg_unit():
    g = Group2Step(2, 1, np.array([[[0.0, 1.0], [-1.0, 0.0]]]))
    # fixed by <J x, x'> = mu [x, x'] with [e1, e2] = 1
    assert np.allclose(j_mu(g, [1.0]), [[0.0, -1.0], [1.0, 0.0]])


def test_j_mu_zero(all_groups):
    for g in all_groups:
        assert np.allclose(j_mu(g, np.zeros(g.d2)), 0.0)


def test_quaternion_j_squared(quat):
    for mu in np.eye(3):
        M = j_mu(quat, mu)
        assert np.allclose(M @ M, -np.eye(4), atol=1e-14)
        assert np.allclose(M, -M.T)
    # mixed directions still satisfy the H-type law
    mu = np.array([0.3, -1.2, 0.5])
    M = j_mu(quat, mu)
    assert np.allclose(-M @ M, (mu @ mu) * np.eye(4), atol=1e-12)


def test_abs_j_mu_htype_and_zero(quat):
    mu = np.array([1.0, 0.0, 0.0])
    assert np.allclose(abs_j_mu(quat, mu), np.eye(4), atol=1e-12)
    assert np.allclose(abs_j_mu(quat, np.zeros(3)), 0.0)


def test_abs_j_mu_nonisotropic_eigs(hei_aniso):
    lam = np.linalg.eigvalsh(abs_j_mu(hei_aniso, [1.0]))
    assert np.allclose(np.sort(lam), [1.0, 1.0, 2.0, 2.0], atol=1e-12)


def test_abs_j_mu_homogeneity_and_square(all_groups, rng):
    for g in all_groups:
        for _ in range(5):
            mu = rng.standard_normal(g.d2)
            r = float(rng.uniform(0.2, 5.0))
            A1 = abs_j_mu(g, r * mu)
            A2 = r * abs_j_mu(g, mu)
            assert np.max(np.abs(A1 - A2)) <= 1e-12 * max(1.0, np.max(np.abs(A2)))
            J = j_mu(g, mu)
            A = abs_j_mu(g, mu)
            lhs = A @ A
            rhs = -J @ J
            assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


def test_kernel_projector_metivier_zero(hei, quat, rng):
    for g in (hei, quat):
        mu = rng.standard_normal(g.d2)
        P = kernel_projector(g, mu)
        assert np.allclose(P, 0.0, atol=1e-10)


def test_kernel_projector_free3(free3, rng):
    for _ in range(10):
        mu = rng.standard_normal(3)
        P = kernel_projector(free3, mu)
        J = j_mu(free3, mu)
        assert np.allclose(P @ P, P, atol=1e-8)
        assert np.allclose(P, P.T, atol=1e-12)
        assert np.allclose(J @ P, 0.0, atol=1e-8)
        assert np.allclose(P @ J, 0.0, atol=1e-8)
        assert abs(np.trace(P) - (free3.d1 - free3.max_rank)) <= 1e-8
        # independent null-space oracle
        assert np.max(np.abs(P - kernel_projector_svd(free3, mu))) <= 1e-8


def test_kernel_projector_rank_drop(free3):
    with pytest.raises(RankDrop):
        kernel_projector(free3, np.zeros(3))


def test_classify_builtins(hei, hei_aniso, free3):
    c = classify(hei, 64, seed=5)
    assert c.max_rank == 2 and c.is_metivier and c.is_htype
    c = classify(hei_aniso, 64, seed=5)
    assert c.is_metivier and not c.is_htype
    sv = np.linalg.svd(j_mu(hei_aniso, [1.0]), compute_uv=False)
    assert np.allclose(np.sort(sv), [1.0, 1.0, 2.0, 2.0])
    c = classify(free3, 64, seed=5)
    assert not c.is_metivier and c.max_rank == 2


def test_metivier_dimension_inequality(metivier_groups):
    for g in metivier_groups:
        assert g.is_metivier
        assert 2 * g.d2 <= g.d - 1


def test_group_multiply_identity_inverse(all_groups, rng):
    for g in all_groups:
        b = random_point(rng, g)
        e = Point(np.zeros(g.d1), np.zeros(g.d2))
        prod = group_multiply(g, e, b)
        assert np.allclose(prod.x, b.x) and np.allclose(prod.u, b.u)
        inv = group_multiply(g, b, group_inverse(b))
        assert np.allclose(inv.x, 0.0, atol=1e-14)
        assert np.allclose(inv.u, 0.0, atol=1e-14)


def test_group_multiply_heisenberg(hei):
    a = Point([1.0, 0.0], [0.0])
    b = Point([0.0, 1.0], [0.0])
    ab = group_multiply(hei, a, b)
    assert np.allclose(ab.x, [1.0, 1.0])
    assert np.allclose(ab.u, [0.5])


def test_associativity(all_groups, rng):
    for g in all_groups:
        for _ in range(10):
            a, b, c = (random_point(rng, g) for _ in range(3))
            left = group_multiply(g, group_multiply(g, a, b), c)
            right = group_multiply(g, a, group_multiply(g, b, c))
            assert np.max(np.abs(left.x - right.x)) <= 1e-14 * max(1, np.max(np.abs(right.x)))
            assert np.max(np.abs(left.u - right.u)) <= 1e-13 * max(1, np.max(np.abs(right.u)))


def test_dilation_homomorphism(all_groups, rng):
    for g in all_groups:
        for _ in range(5):
            a, b = random_point(rng, g), random_point(rng, g)
            r = float(rng.uniform(0.3, 3.0))
            lhs = group_multiply(g, dilate(r, a), dilate(r, b))
            rhs = dilate(r, group_multiply(g, a, b))
            assert np.allclose(lhs.x, rhs.x, atol=1e-13)
            assert np.allclose(lhs.u, rhs.u, atol=1e-13)


def test_cotangent_translate(hei, rng):
    cov = Covector([0.3, -0.7], [0.9])
    # second-layer-only translations act trivially
    out = cotangent_translate(hei, Point([0.0, 0.0], [2.0]), cov)
    assert np.allclose(out.xi, cov.xi) and np.allclose(out.mu, cov.mu)
    # mu = 0 acts trivially
    out = cotangent_translate(hei, Point([1.0, 2.0], [0.0]), Covector([0.3, -0.7], [0.0]))
    assert np.allclose(out.xi, [0.3, -0.7])
    # Heisenberg example: xi - J_mu y / 2 with J e1 = (0, 1)
    out = cotangent_translate(hei, Point([1.0, 0.0], [0.0]), Covector([0.0, 0.0], [1.0]))
    assert np.allclose(out.xi, [0.0, -0.5])
    assert np.allclose(out.mu, [1.0])
    # inverse round trip
    y = Point([0.4, -1.1], [0.2])
    back = cotangent_translate_inv(hei, y, cotangent_translate(hei, y, cov))
    assert np.allclose(back.xi, cov.xi, atol=1e-15)


def test_bracket_validation_reports_indices():
    B = np.zeros((1, 2, 2))
    B[0, 0, 1] = 1.0
    B[0, 1, 0] = -0.5  # not antisymmetric
    with pytest.raises(ValueError, match=r"k=0.*i=0.*j=1|antisym"):
        Group2Step(2, 1, B)


def test_bracket_surjectivity_validation():
    B = np.zeros((2, 2, 2))
    B[0, 0, 1] = 1.0
    B[0, 1, 0] = -1.0
    # second layer direction 2 is never hit
    with pytest.raises(ValueError, match="surject"):
        Group2Step(2, 2, B)


def test_group_json_roundtrip(tmp_path, quat):
    data = group_to_dict(quat)
    path = tmp_path / "group.json"
    path.write_text(json.dumps(data))
    g2 = group_from_dict(json.loads(path.read_text()))
    assert g2.d1 == quat.d1 and g2.d2 == quat.d2
    assert np.allclose(g2.bracket, quat.bracket)


def test_classification_invariants(all_groups):
    for g in all_groups:
        c = g.classification
        if c.is_htype:
            assert c.is_metivier
        if c.is_metivier:
            assert c.max_rank == g.d1


def test_unit_vectors_deterministic():
    a = unit_vectors(make_rng(7, 1), 10, 3)
    b = unit_vectors(make_rng(7, 1), 10, 3)
    assert np.array_equal(a, b)
