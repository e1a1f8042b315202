"""The complex phase, its mixed Hessian and the square-root density.

phi(t, x, xi) = (x - x^t).xi^t + (u - u^t).mu + (i/4) <|J_mu|(x - x^t), x - x^t>

The first-layer mixed Hessian has the closed form

    Phi_0 = exp(theta Jb) exp(-i theta |Jb|) (I + i theta (|Jb| + i Jb) xibar xibar^T)

with determinant exp(-i theta tr|Jb|) (1 + i theta <|Jb| xibar, xibar>); the
density is the principal square root, which is the continuous determination
equal to 1 at t = 0 because the radicand keeps real part 1.
"""

from dataclasses import dataclass

import numpy as np

from . import fd
from .errors import OutsideOmega, ZeroFrequency
from .flow import flow_batch, flow_maps_fd, flow_origin, unit_skew_eigdata
from .groups import Covector, Group2Step, Point, abs_j_mu, j_mu

RANK_TOL = 1e-9


@dataclass
class PhaseEval:
    value: complex
    grad_xi: np.ndarray   # complex row d-vector d_xi phi
    grad_x: np.ndarray    # complex d-vector nabla_x phi
    im_part: float

    def __post_init__(self):
        if self.im_part < 0:
            raise ValueError("Im phi must be nonnegative")


@dataclass
class HessianEval:
    phi0: np.ndarray      # complex d1 x d1
    det_phi: complex
    density: complex


def require_omega(g: Group2Step, mu: np.ndarray, tol: float = RANK_TOL):
    """Raise OutsideOmega unless rk J_mu equals the group's generic maximal rank."""
    mu = np.asarray(mu, dtype=float)
    if np.linalg.norm(mu) == 0.0:
        raise OutsideOmega("mu = 0 lies outside the maximal-rank set")
    s = np.linalg.svd(j_mu(g, mu), compute_uv=False)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    if rank < g.max_rank:
        raise OutsideOmega(f"rk J_mu = {rank} < generic rank {g.max_rank}")


def _check_args(g: Group2Step, cov: Covector):
    if cov.xi_norm() == 0.0:
        raise ZeroFrequency("phase requires xi != 0")
    require_omega(g, cov.mu)


def phase_value(g: Group2Step, t: float, p: Point, cov: Covector) -> PhaseEval:
    """Evaluate phi with its closed-form gradients.

    grad_x is exact; grad_xi combines the flow identity
    d_xi phi = (x - x^t)^T Phi_underline + (i/4) sum_j <d_mu_j |J_mu| dx, dx> e_j
    with FD Jacobians of the flow maps and of mu -> |J_mu|.
    """
    _check_args(g, cov)
    fp = flow_origin(g, t, cov)
    dx = p.x - fp.x
    du = p.u - fp.u
    absJ = abs_j_mu(g, cov.mu)
    quad = float(dx @ absJ @ dx)
    quad = max(quad, 0.0)
    value = complex(dx @ fp.xi + du @ cov.mu, 0.25 * quad)

    grad_x = np.concatenate([fp.xi + 0.5j * (absJ @ dx), cov.mu.astype(complex)])

    dxt, dxit = flow_maps_fd(g, t, cov)
    phi_under = dxit.astype(complex)
    phi_under[: g.d1] -= 0.5j * (absJ @ dxt[: g.d1])
    delta = np.concatenate([dx, du])
    grad_xi = delta.astype(complex) @ phi_under
    # mu-derivative of |J_mu| contracted twice with x - x^t
    for j in range(g.d2):
        e = np.zeros(g.d2)
        e[j] = 1.0
        h = fd.REL_STEP_XI * max(1.0, abs(cov.mu[j]))
        dabs = (abs_j_mu(g, cov.mu + h * e) - abs_j_mu(g, cov.mu - h * e)) / (2.0 * h)
        grad_xi[g.d1 + j] += 0.25j * float(dx @ dabs @ dx)

    return PhaseEval(value=value, grad_xi=grad_xi, grad_x=grad_x, im_part=0.25 * quad)


def mixed_hessian(g: Group2Step, t: float, cov: Covector) -> HessianEval:
    """Closed-form Phi_0, det Phi and the principal-branch density."""
    _check_args(g, cov)
    table = flow_batch(g, t, cov.xi[None, :], cov.mu[None, :])
    th = table.theta[0]
    a, V = table.eig_a[0], table.eig_V[0]
    xibar = cov.xi_bar()
    absa = np.abs(a)
    core = np.eye(g.d1, dtype=complex) + 1j * th * np.outer(
        V @ ((absa + a) * (V.conj().T @ xibar)), xibar
    )
    EU = (V * np.exp(-1j * th * (a + absa))) @ V.conj().T  # exp(theta Jb) exp(-i theta |Jb|)
    phi0 = EU @ core
    return HessianEval(phi0=phi0, det_phi=complex(table.det_phi[0]), density=complex(table.dphi[0]))


def mixed_hessian_fd(g: Group2Step, t: float, cov: Covector) -> np.ndarray:
    """Phi_0 from FD Jacobians: d_xi xi^t - (i/2)|J_mu| d_xi x^t (first layer only)."""
    _check_args(g, cov)
    d1 = g.d1

    def xpart(v):
        fp = flow_origin(g, t, Covector(v, cov.mu))
        return fp.x

    def xipart(v):
        fp = flow_origin(g, t, Covector(v, cov.mu))
        return fp.xi

    dxt = fd.jacobian(xpart, cov.xi)
    dxit = fd.jacobian(xipart, cov.xi)
    return dxit - 0.5j * abs_j_mu(g, cov.mu) @ dxt[:d1]


def full_hessian_fd(g: Group2Step, t: float, p: Point, cov: Covector) -> np.ndarray:
    """Full d x d mixed Hessian d_xi nabla_x phi by FD of the exact gradient."""
    _check_args(g, cov)

    def grad(v):
        pe = phase_value(g, t, p, Covector(v[: g.d1], v[g.d1 :]))
        return pe.grad_x

    return fd.jacobian(grad, cov.as_vector())


def phase_grad_xi_fd(g: Group2Step, t: float, p: Point, cov: Covector) -> np.ndarray:
    """d_xi phi by direct FD of the scalar phase; independent of the gradient formula."""

    def scalar(v):
        c = Covector(v[: g.d1], v[g.d1 :])
        fp = flow_origin(g, t, c)
        dx = p.x - fp.x
        quad = float(dx @ abs_j_mu(g, c.mu) @ dx)
        return complex(dx @ fp.xi + (p.u - fp.u) @ c.mu, 0.25 * quad)

    return fd.gradient(scalar, cov.as_vector())


def density_htype(g: Group2Step, t: float, cov: Covector) -> tuple:
    """(det Phi, density) from the H-type closed form exp(-i theta d1)(1 + i theta)."""
    th = cov.theta(t)
    det = np.exp(-1j * th * g.d1) * (1.0 + 1j * th)
    return complex(det), complex(np.exp(-0.5j * th * g.d1) * np.sqrt(1.0 + 1j * th))


def stationarity_check(g: Group2Step, t: float, p: Point, cov: Covector, tol: float) -> bool:
    """True iff |d_xi phi| <= tol; on Metivier groups this detects x = x^t."""
    pe = phase_value(g, t, p, cov)
    return bool(np.linalg.norm(pe.grad_xi) <= tol)
