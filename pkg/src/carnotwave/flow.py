"""Hamiltonian geodesic flow generated by H(x, xi) = |xi + J_mu x/2|.

The closed forms for the flow from the origin are, with theta = t|mu|/(2|xi|)
and Jb the unit-direction skew map J_{mu/|mu|}:

    x^t  = t exp(theta Jb) sinch(theta Jb) xibar
    xi^t = exp(theta Jb) cosh(theta Jb) xi
    u^t  = (t^2/4) int_0^1 [ ((exp(2 tau theta Jb) - I)/(theta Jb)) xibar,
                             exp(2 tau theta Jb) xibar ] dtau
    mu.u^t = (t|xi|/2) (1 - <sinch(theta Jb) cosh(theta Jb) xibar, xibar>)

all evaluated through one Hermitian eigendecomposition of i*Jb, so repeated
eigenvalues cost nothing extra and the scalar functions (sinc, cos, exp of
imaginary arguments) are cancellation-free.  For d2 = 1 the second layer is
scalar and u^t follows exactly from the mu.u^t closed form; on H-type groups
u^t is parallel to mu with an explicit scalar factor.  Remaining groups
integrate the u^t integral by Gauss-Legendre quadrature whose node count
grows with |theta|.

The RK4 integrator at the bottom is a cross-check oracle, never used by
production paths.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fd
from .errors import NearCharacteristic, ZeroFrequency
from .groups import (
    Covector,
    Group2Step,
    Point,
    cotangent_translate,
    cotangent_translate_inv,
    group_multiply,
    j_mu_batch,
)
from .quadrature import gauss_legendre

STRAIGHT_LINE_THRESHOLD = 1e-10  # on |mu| |t| / |xi|; below it the flow is a straight line
RK4_DEFAULT_STEP = 1e-4
H_FLOOR = 1e-8


@dataclass
class FlowPoint:
    """The quadruple (x^t, u^t, xi^t, mu) of the flow at time t."""

    x: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    mu: np.ndarray

    def point(self) -> Point:
        return Point(self.x, self.u)

    def covector(self) -> Covector:
        return Covector(self.xi, self.mu)


def hamiltonian(g: Group2Step, p: Point, cov: Covector) -> float:
    """H(x, xi) = |xi + J_mu x / 2|."""
    J = np.einsum("k,kij->ij", cov.mu, g.j_basis)
    return float(np.linalg.norm(cov.xi + 0.5 * J @ p.x))


def one_minus_sinc(x: np.ndarray) -> np.ndarray:
    """1 - sin(x)/x without cancellation near x = 0."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    direct = 1.0 - np.sin(safe) / safe
    taylor = x2 / 6.0 - x2 * x2 / 120.0
    return np.where(small, taylor, direct)


def unit_skew_eigdata(g: Group2Step, mubar: np.ndarray):
    """Eigendata (a, V) of Jb = J_mubar for a stack of unit mu, Jb = V diag(-i a) V^H.

    For d2 = 1 only two skew maps occur, so their decompositions are cached
    on the group.
    """
    mubar = np.atleast_2d(np.asarray(mubar, dtype=float))
    n = mubar.shape[0]
    if g.d2 == 1:
        cache = getattr(g, "_flow_eig_cache", None)
        if cache is None:
            cache = {}
            g._flow_eig_cache = cache
        a = np.empty((n, g.d1))
        V = np.empty((n, g.d1, g.d1), dtype=complex)
        for sign in (1.0, -1.0):
            rows = np.nonzero(np.sign(mubar[:, 0]) == sign)[0]
            if rows.size == 0:
                continue
            if sign not in cache:
                J = sign * g.j_basis[0]
                cache[sign] = np.linalg.eigh(1j * J.astype(complex))
            asign, Vsign = cache[sign]
            a[rows] = asign
            V[rows] = Vsign
        return a, V
    J = j_mu_batch(g, mubar)
    return np.linalg.eigh(1j * J.astype(complex))


@dataclass
class FlowTable:
    """Vectorized flow and phase-density data at fixed t over a batch of covectors.

    Carries everything the oscillatory kernels and the transport coefficients
    need per frequency node.
    """

    t: float
    xi: np.ndarray        # (n, d1)
    mu: np.ndarray        # (n, d2)
    xt: np.ndarray        # (n, d1)
    ut: np.ndarray        # (n, d2)
    xit: np.ndarray       # (n, d1)
    theta: np.ndarray     # (n,)
    xinorm: np.ndarray    # (n,)
    munorm: np.ndarray    # (n,)
    abs_jmu: np.ndarray   # (n, d1, d1), |J_mu| (1-homogeneous in mu)
    tr_jbar: np.ndarray   # (n,), tr|Jb|
    c1: np.ndarray        # (n,), <|Jb| xibar, xibar>
    c2: np.ndarray        # (n,), <|Jb|^2 xibar, xibar>
    c3: np.ndarray        # (n,), <|Jb|^3 xibar, xibar>
    det_phi: np.ndarray   # (n,) complex, det Phi_0
    dphi: np.ndarray      # (n,) complex, principal square root of det Phi_0
    w_vec: np.ndarray     # (n, d1) complex, exp(-2 i theta |Jb|)(|Jb| + i Jb) xi
    absjbar_w: np.ndarray  # (n, d1) complex, |Jb| w_vec
    w0_vec: np.ndarray    # (n, d1) complex, (|Jb| + i Jb) xi
    absjbar_w0: np.ndarray  # (n, d1) complex, |Jb| w0_vec
    eig_a: np.ndarray     # (n, d1)
    eig_V: np.ndarray     # (n, d1, d1) complex

    def __len__(self):
        return self.xi.shape[0]


def _ut_quadrature_from_eig(g, t, theta, a, V, xihat, n_tau=None):
    """Gauss-Legendre evaluation of the u^t integral over tau in [0, 1]."""
    theta = np.asarray(theta, dtype=float)
    if n_tau is None:
        n_tau = max(16, 8 * int(np.ceil(np.max(np.abs(theta)) + 1e-12)))
    tau, wts = gauss_legendre(0.0, 1.0, n_tau)
    n = xihat.shape[0]
    VBV = np.einsum("nip,kij,njq->nkpq", V, g.bracket + 0j, V)  # V^T B[k] V
    out = np.zeros((n, g.d2))
    y = 2.0 * theta[:, None] * a  # (n, d1)
    for m in range(n_tau):
        ym = tau[m] * y
        h_hat = np.exp(-1j * ym) * xihat
        # eigenvalues of (exp(2 tau theta Jb) - I)/(theta Jb); the sinc form
        # has no cancellation and hits the 2*tau limit at a = 0 exactly
        g_fac = 2.0 * tau[m] * np.exp(-0.5j * ym) * np.sinc(ym / (2.0 * np.pi))
        g_hat = g_fac * xihat
        br = np.einsum("nkpq,np,nq->nk", VBV, g_hat, h_hat)
        out += wts[m] * br.real
    return 0.25 * t * t * out


def flow_batch(g: Group2Step, t: float, xi: np.ndarray, mu: np.ndarray, n_tau=None) -> FlowTable:
    """Closed-form flow and phase-density data for a batch of covectors."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    n, d1 = xi.shape
    xinorm = np.linalg.norm(xi, axis=1)
    if np.any(xinorm == 0.0):
        raise ZeroFrequency("xi = 0 in flow batch")
    munorm = np.linalg.norm(mu, axis=1)
    theta = 0.5 * t * munorm / xinorm
    xibar = xi / xinorm[:, None]

    hasmu = munorm > 0.0
    # flow values take the straight-line limit below the theta threshold
    straight = (munorm * abs(t) / xinorm) < STRAIGHT_LINE_THRESHOLD

    xt = t * xibar
    ut = np.zeros((n, g.d2))
    xit = xi.copy()
    abs_jmu = np.zeros((n, d1, d1))
    tr_jbar = np.zeros(n)
    c1 = np.zeros(n)
    c2 = np.zeros(n)
    c3 = np.zeros(n)
    det_phi = np.ones(n, dtype=complex)
    dphi = np.ones(n, dtype=complex)
    w_vec = np.zeros((n, d1), dtype=complex)
    absjbar_w = np.zeros((n, d1), dtype=complex)
    w0_vec = np.zeros((n, d1), dtype=complex)
    absjbar_w0 = np.zeros((n, d1), dtype=complex)
    eig_a = np.zeros((n, d1))
    eig_V = np.tile(np.eye(d1, dtype=complex), (n, 1, 1))

    if hasmu.any():
        rows = np.nonzero(hasmu)[0]
        mb = mu[rows] / munorm[rows][:, None]
        a, V = unit_skew_eigdata(g, mb)
        eig_a[rows] = a
        eig_V[rows] = V
        th = theta[rows]
        xihat = np.einsum("nji,nj->ni", V.conj(), xibar[rows] + 0j)

        absa = np.abs(a)
        tr_jbar[rows] = absa.sum(axis=1)
        p2 = np.abs(xihat) ** 2
        c1[rows] = (absa * p2).sum(axis=1)
        c2[rows] = (absa**2 * p2).sum(axis=1)
        c3[rows] = (absa**3 * p2).sum(axis=1)
        absb = np.einsum("nij,nj,nkj->nik", V, absa + 0j, V.conj()).real
        abs_jmu[rows] = munorm[rows][:, None, None] * absb

        denom = 1.0 + 1j * th * c1[rows]
        det_phi[rows] = np.exp(-1j * th * tr_jbar[rows]) * denom
        dphi[rows] = np.exp(-0.5j * th * tr_jbar[rows]) * np.sqrt(denom)

        # w = exp(-2 i theta |Jb|) (|Jb| + i Jb) xi; |a| + a are the eigenvalues
        # of |Jb| + i Jb on the shared eigenbasis
        w0_hat = (absa + a) * (xinorm[rows][:, None] * xihat)
        w_hat = np.exp(-2j * th[:, None] * absa) * w0_hat
        w_vec[rows] = np.einsum("nij,nj->ni", V, w_hat)
        absjbar_w[rows] = np.einsum("nij,nj->ni", V, absa * w_hat)
        w0_vec[rows] = np.einsum("nij,nj->ni", V, w0_hat)
        absjbar_w0[rows] = np.einsum("nij,nj->ni", V, absa * w0_hat)

        curved = rows[~straight[rows]]
        if curved.size:
            sel = ~straight[rows]
            thc = th[sel][:, None]
            ac = a[sel]
            Vc = V[sel]
            xh = xihat[sel]
            exp_th = np.exp(-1j * thc * ac)
            cos_th = np.cos(thc * ac)
            sinch_th = np.sinc(thc * ac / np.pi)
            xt[curved] = t * np.einsum("nij,nj->ni", Vc, exp_th * sinch_th * xh).real
            xit[curved] = xinorm[curved][:, None] * np.einsum(
                "nij,nj->ni", Vc, exp_th * cos_th * xh
            ).real

            if g.d2 == 1:
                # second layer is scalar: u^t = (mu . u^t) / mu
                oms = (np.abs(xh) ** 2 * one_minus_sinc(2.0 * thc * ac)).sum(axis=1)
                mu_dot = 0.5 * t * xinorm[curved] * oms
                ut[curved, 0] = mu_dot / mu[curved, 0]
            elif g.is_htype:
                thr = theta[curved]
                factor = 0.25 * t * t / thr * one_minus_sinc(2.0 * thr)
                ut[curved] = factor[:, None] * mb[sel]
            else:
                ut[curved] = _ut_quadrature_from_eig(
                    g, t, theta[curved], ac, Vc, xh, n_tau=n_tau
                )

    return FlowTable(
        t=t, xi=xi, mu=mu, xt=xt, ut=ut, xit=xit, theta=theta, xinorm=xinorm,
        munorm=munorm, abs_jmu=abs_jmu, tr_jbar=tr_jbar, c1=c1, c2=c2, c3=c3,
        det_phi=det_phi, dphi=dphi, w_vec=w_vec, absjbar_w=absjbar_w,
        w0_vec=w0_vec, absjbar_w0=absjbar_w0, eig_a=eig_a, eig_V=eig_V,
    )


def flow_origin(g: Group2Step, t: float, cov: Covector, n_tau=None) -> FlowPoint:
    """Closed-form flow from the origin; straight lines in the mu = 0 limit."""
    if cov.xi_norm() == 0.0:
        raise ZeroFrequency("flow is undefined for xi = 0")
    table = flow_batch(g, t, cov.xi[None, :], cov.mu[None, :], n_tau=n_tau)
    return FlowPoint(table.xt[0], table.ut[0], table.xit[0], cov.mu.copy())


def mu_dot_ut_closed(g: Group2Step, t: float, cov: Covector) -> float:
    """Closed form for mu . u^t."""
    if cov.xi_norm() == 0.0:
        raise ZeroFrequency("xi = 0")
    if cov.mu_norm() == 0.0:
        return 0.0
    a, V = unit_skew_eigdata(g, cov.mu_bar()[None, :])
    a, V = a[0], V[0]
    th = cov.theta(t)
    xihat = V.conj().T @ (cov.xi_bar() + 0j)
    oms = float((np.abs(xihat) ** 2 * one_minus_sinc(2.0 * th * a)).sum())
    return 0.5 * t * cov.xi_norm() * oms


def ut_quadrature(g: Group2Step, t: float, cov: Covector, n_tau=None) -> np.ndarray:
    """u^t by Gauss-Legendre quadrature of the defining tau-integral."""
    if cov.xi_norm() == 0.0:
        raise ZeroFrequency("xi = 0")
    if cov.mu_norm() * abs(t) / cov.xi_norm() < STRAIGHT_LINE_THRESHOLD:
        return np.zeros(g.d2)
    a, V = unit_skew_eigdata(g, cov.mu_bar()[None, :])
    xihat = np.einsum("nji,nj->ni", V.conj(), cov.xi_bar()[None, :] + 0j)
    theta = np.array([cov.theta(t)])
    return _ut_quadrature_from_eig(g, t, theta, a, V, xihat, n_tau=n_tau)[0]


def flow_htype(g: Group2Step, t: float, cov: Covector) -> FlowPoint:
    """H-type closed form; only valid when -J_mu^2 = |mu|^2 I."""
    if cov.xi_norm() == 0.0:
        raise ZeroFrequency("xi = 0")
    if cov.mu_norm() * abs(t) / cov.xi_norm() < STRAIGHT_LINE_THRESHOLD:
        return FlowPoint(t * cov.xi_bar(), np.zeros(g.d2), cov.xi.copy(), cov.mu.copy())
    th = cov.theta(t)
    Jb = np.einsum("k,kij->ij", cov.mu_bar(), g.j_basis)
    rot = np.cos(th) * np.eye(g.d1) + np.sin(th) * Jb
    x = t * np.sinc(th / np.pi) * rot @ cov.xi_bar()
    xi_t = np.cos(th) * rot @ cov.xi
    u = 0.25 * t * t / th * one_minus_sinc(2.0 * th) * cov.mu_bar()
    return FlowPoint(x, u, xi_t, cov.mu.copy())


def flow_base(g: Group2Step, t: float, y: Point, cov: Covector, n_tau=None):
    """Flow from base point y by left-translation covariance.

    Returns (Point, Covector) at time t.
    """
    cov0 = cotangent_translate_inv(g, y, cov)
    if cov0.xi_norm() == 0.0:
        raise ZeroFrequency("translated covector has xi = 0")
    fp = flow_origin(g, t, cov0, n_tau=n_tau)
    pt = group_multiply(g, y, fp.point())
    ct = cotangent_translate(g, y, fp.covector())
    return pt, ct


def _hamilton_rhs(g: Group2Step, Y: np.ndarray) -> np.ndarray:
    """RHS of the Hamilton equations for a batch of states [x, u, xi, mu]."""
    d1, d2 = g.d1, g.d2
    x = Y[:, :d1]
    xi = Y[:, d1 + d2 : 2 * d1 + d2]
    mu = Y[:, 2 * d1 + d2 :]
    Jmu = np.einsum("nk,kij->nij", mu, g.j_basis)
    zeta = xi + 0.5 * np.einsum("nij,nj->ni", Jmu, x)
    H = np.linalg.norm(zeta, axis=1)
    if np.any(H < H_FLOOR):
        raise NearCharacteristic("Hamiltonian fell below threshold during integration")
    dx = zeta / H[:, None]
    du = 0.5 * np.einsum("kij,ni,nj->nk", g.bracket, x, zeta) / H[:, None]
    dxi = 0.5 * np.einsum("nij,nj->ni", Jmu, zeta) / H[:, None]
    out = np.empty_like(Y)
    out[:, :d1] = dx
    out[:, d1 : d1 + d2] = du
    out[:, d1 + d2 : 2 * d1 + d2] = dxi
    out[:, 2 * d1 + d2 :] = 0.0
    return out


def flow_ode_oracle_batch(g: Group2Step, t: float, Y0: np.ndarray, step: float = None) -> np.ndarray:
    """Classical RK4 for a batch of initial states; cross-check oracle only."""
    if step is None:
        step = RK4_DEFAULT_STEP * max(1.0, abs(t))
    if step <= 0:
        raise ValueError("step must be positive")
    Y = np.array(Y0, dtype=float)
    if t == 0.0:
        return Y
    n_steps = max(1, int(np.ceil(abs(t) / step)))
    h = t / n_steps
    for _ in range(n_steps):
        k1 = _hamilton_rhs(g, Y)
        k2 = _hamilton_rhs(g, Y + 0.5 * h * k1)
        k3 = _hamilton_rhs(g, Y + 0.5 * h * k2)
        k4 = _hamilton_rhs(g, Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def flow_ode_oracle(g: Group2Step, t: float, p0: Point, cov0: Covector, step: float = None) -> FlowPoint:
    """RK4 integration of the Hamilton equations from (p0, cov0)."""
    Y0 = np.concatenate([p0.x, p0.u, cov0.xi, cov0.mu])[None, :]
    Y = flow_ode_oracle_batch(g, t, Y0, step=step)[0]
    d1, d2 = g.d1, g.d2
    return FlowPoint(Y[:d1], Y[d1 : d1 + d2], Y[d1 + d2 : 2 * d1 + d2], Y[2 * d1 + d2 :])


def geodesic_sphere_sample(g: Group2Step, t: float, directions, jobs: int = 1):
    """Flow endpoints (x^t, u^t) for a list of covector directions.

    Directions with xi = 0 are skipped and reported.  Returns
    (points, skipped) where points[i] is None for skipped entries; output
    order always matches the input order.
    """
    covs = list(directions)
    skipped = [i for i, c in enumerate(covs) if c.xi_norm() == 0.0]
    skipped_set = set(skipped)
    valid = [i for i in range(len(covs)) if i not in skipped_set]
    points: list = [None] * len(covs)

    def run(i):
        fp = flow_origin(g, t, covs[i])
        return Point(fp.x, fp.u)

    if jobs > 1 and len(valid) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for i, pt in zip(valid, pool.map(run, valid)):
                points[i] = pt
    else:
        for i in valid:
            points[i] = run(i)
    return points, skipped


def flow_maps_fd(g: Group2Step, t: float, cov: Covector, rel_step: float = fd.REL_STEP_XI):
    """FD Jacobians (d_xi x^t, d_xi xi^t) of the flow maps, both d x d."""

    def xmap(v):
        fp = flow_origin(g, t, Covector(v[: g.d1], v[g.d1 :]))
        return np.concatenate([fp.x, fp.u])

    def ximap(v):
        fp = flow_origin(g, t, Covector(v[: g.d1], v[g.d1 :]))
        return np.concatenate([fp.xi, fp.mu])

    v0 = cov.as_vector()
    return fd.jacobian(xmap, v0, rel=rel_step), fd.jacobian(ximap, v0, rel=rel_step)
