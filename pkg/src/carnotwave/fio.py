"""Oscillatory kernels I[q] and the verification studies built on them.

I[q](t, x) = (2 pi)^-d  int  exp(i phi(t, x, xi)) q(t, xi) d_phi(t, xi) dxi

evaluated by tensor Gauss-Legendre quadrature over the symbol's support box.
Since Im phi >= 0 the integrand never exceeds |q| |d_phi|, and error control
is by node doubling rather than oscillatory-quadrature tricks; desk scales
keep this honest.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .decompose import MuSectorDecomposition, make_mu_sectors, shear_k_window, sheared_symbol
from .errors import RefineFailure
from .flow import FlowTable, flow_batch
from .groups import Covector, Group2Step, Point
from .kernels import phase_sum
from .quadrature import tensor_rule
from .symbols import band_symbol
from .transport import (
    Symbol,
    amplitude_iterates,
    apply_lambda_batch,
    apply_ringring_batch,
    lambda_coeffs_from_table,
    symbol_derivs,
)

EPS_RESIDUAL = 1e-30


@dataclass
class QuadratureSpec:
    """Tensor Gauss-Legendre settings for one kernel evaluation.

    mode "box" integrates over the support bounding box.  mode "annulus"
    (d1 = 2, d2 = 1 only) puts Gauss-Legendre nodes radially on the |xi|
    band, a periodic-trapezoid rule on the angle, and two-sided
    Gauss-Legendre bands in mu, so none of the budget is spent off the
    support; axis_counts then means (radial, angular, mu) counts.
    """

    nodes_per_dim: int = 24
    axis_counts: list = None      # optional per-axis override
    region: object = None         # optional SupportRegion; default: the symbol's
    tolerance: float = None       # refine gate for eval_kernel
    mode: str = "box"

    def __post_init__(self):
        if self.nodes_per_dim < 8:
            raise ValueError("nodes_per_dim must be at least 8")
        if self.mode not in ("box", "annulus"):
            raise ValueError("mode must be 'box' or 'annulus'")

    def counts(self, d: int, factor: int = 1):
        base = self.axis_counts if self.axis_counts is not None else [self.nodes_per_dim] * d
        if len(base) != d:
            raise ValueError("axis_counts length mismatch")
        return [int(n) * factor for n in base]


@dataclass
class KernelSample:
    t: float
    point: Point
    value: complex
    refine_error: float

    def __post_init__(self):
        if self.refine_error < 0:
            raise ValueError("refine_error must be nonnegative")


@dataclass
class NodeTable:
    """Flow data and combined coefficients at the live quadrature nodes."""

    flow: FlowTable
    coeff: np.ndarray          # (n,) complex: weight * q * d_phi
    weights: np.ndarray        # (n,) quadrature weights of the live nodes
    qvals: np.ndarray          # (n,) complex symbol values
    norm_const: float


def _annulus_nodes(region, counts):
    """Polar xi nodes on the |xi| band times two-sided GL bands in mu (d1=2, d2=1)."""
    from .quadrature import gauss_legendre

    n_r, n_ang, n_mu = counts
    r, wr = gauss_legendre(*region.xi_band, n_r)
    ang = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    w_ang = 2.0 * np.pi / n_ang
    if region.mu_band is not None and region.mu_band[0] > 0:
        lo, hi = region.mu_band
        m1, wm1 = gauss_legendre(lo, hi, n_mu)
        m2, wm2 = gauss_legendre(-hi, -lo, n_mu)
        mu = np.concatenate([m1, m2])
        wmu = np.concatenate([wm1, wm2])
    else:
        hi = (region.mu_band or (0.0, region.ratio_band[1] * region.xi_band[1]))[1]
        mu, wmu = gauss_legendre(-hi, hi, 2 * n_mu)
    R, A, M = np.meshgrid(r, ang, mu, indexing="ij")
    WR, _, WM = np.meshgrid(wr, np.full(n_ang, w_ang), wmu, indexing="ij")
    pts = np.stack(
        [(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel(), M.ravel()], axis=1
    )
    wts = (WR * w_ang * WM * R).ravel()
    return pts, wts


def build_node_table(g: Group2Step, q: Symbol, t: float, spec: QuadratureSpec,
                     factor: int = 1) -> NodeTable:
    """Quadrature nodes over the support, masked to q != 0, with flow data."""
    region = spec.region if spec.region is not None else q.support
    if spec.mode == "annulus":
        if g.d1 != 2 or g.d2 != 1:
            raise ValueError("annulus mode requires d1 = 2, d2 = 1")
        pts, wts = _annulus_nodes(region, spec.counts(3, factor=factor))
    else:
        bounds = region.box(g.d1, g.d2)
        pts, wts = tensor_rule(bounds, spec.counts(g.d, factor=factor))
    xi, mu = pts[:, : g.d1], pts[:, g.d1 :]
    qv = q.eval(t, xi, mu)
    mask = qv != 0
    xi, mu, wts, qv = xi[mask], mu[mask], wts[mask], qv[mask]
    table = flow_batch(g, t, xi, mu)
    norm_const = (2.0 * math.pi) ** (-g.d)
    coeff = norm_const * wts * qv * table.dphi
    return NodeTable(flow=table, coeff=coeff, weights=wts, qvals=qv, norm_const=norm_const)


def _points_arrays(g: Group2Step, points) -> tuple:
    if isinstance(points, Point):
        points = [points]
    px = np.stack([p.x for p in points])
    pu = np.stack([p.u for p in points])
    return px, pu


def kernel_values(g: Group2Step, table: NodeTable, points) -> np.ndarray:
    """I[q] at a batch of points from a prebuilt node table."""
    px, pu = _points_arrays(g, points)
    fl = table.flow
    return phase_sum(px, pu, fl.xt, fl.ut, fl.xit, fl.mu, fl.abs_jmu, table.coeff)


def eval_kernel(g: Group2Step, q: Symbol, t: float, p: Point, spec: QuadratureSpec) -> KernelSample:
    """I[q](t, p) with a node-doubling refinement estimate attached.

    Raises RefineFailure when spec.tolerance is set and the doubling step
    moves the value by more than it.
    """
    coarse = kernel_values(g, build_node_table(g, q, t, spec), p)[0]
    fine = kernel_values(g, build_node_table(g, q, t, spec, factor=2), p)[0]
    err = abs(fine - coarse)
    if spec.tolerance is not None and err > spec.tolerance:
        raise RefineFailure(f"refinement moved the value by {err:.3e} > {spec.tolerance:.3e}")
    return KernelSample(t=t, point=p, value=complex(fine), refine_error=float(err))


def abs_integral_bound(g: Group2Step, table: NodeTable) -> float:
    """(2 pi)^-d quadrature of |q| |d_phi|, an upper bound for |I[q]| (Im phi >= 0)."""
    return float(np.sum(np.abs(table.coeff)))


# ---------------------------------------------------------------------------
# wave-operator identity


def _hgrad_curve(g: Group2Step, p: Point, j: int, s: float) -> Point:
    """The integral curve of the horizontal field X_j through p at parameter s."""
    e = np.zeros(g.d1)
    e[j] = 1.0
    return Point(p.x + s * e, p.u + 0.5 * s * g.lie_bracket(p.x, e))


def wave_identity_residual(g: Group2Step, q: Symbol, t: float, p: Point,
                           spec: QuadratureSpec, ht: float = 1e-3,
                           hx: float = None) -> float:
    """Relative residual of (d_t^2 + L) I[q] = I[-2i|xi| d_t q + Lambda q].

    d_t^2 by a 5-point stencil in t; the sub-Laplacian by second differences
    along the exact integral curves of the horizontal fields, with stencil
    step scaled to the symbol's frequency band.
    """
    if hx is None:
        hx = 2e-3 / q.support.xi_band[1]

    tables = {dt: build_node_table(g, q, t + dt * ht, spec) for dt in (-2, -1, 0, 1, 2)}
    center = tables[0]

    # time part at the point
    vals_t = {dt: kernel_values(g, tables[dt], p)[0] for dt in tables}
    d2t = (
        -vals_t[2] + 16.0 * vals_t[1] - 30.0 * vals_t[0] + 16.0 * vals_t[-1] - vals_t[-2]
    ) / (12.0 * ht * ht)

    # sub-Laplacian at the point: L = -sum_j X_j^2 along exact X_j curves
    stencil = [p]
    for j in range(g.d1):
        stencil.append(_hgrad_curve(g, p, j, hx))
        stencil.append(_hgrad_curve(g, p, j, -hx))
    vals_x = kernel_values(g, center, stencil)
    lap = 0.0 + 0.0j
    for j in range(g.d1):
        lap -= (vals_x[1 + 2 * j] - 2.0 * vals_x[0] + vals_x[2 + 2 * j]) / (hx * hx)
    lhs = d2t + lap

    # right-hand side: one quadrature with the transported symbol
    fl = center.flow
    lam = apply_lambda_batch(g, q, t, fl.xi, fl.mu, table=fl)
    sd = symbol_derivs(q, t, fl.xi, fl.mu, need_second_t=False)
    svals = -2j * fl.xinorm * sd["qt"] + lam
    coeff = center.norm_const * center.weights * svals * fl.dphi
    px, pu = _points_arrays(g, p)
    rhs = phase_sum(px, pu, fl.xt, fl.ut, fl.xit, fl.mu, fl.abs_jmu, coeff)[0]

    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs) + EPS_RESIDUAL))


# ---------------------------------------------------------------------------
# large-time decomposition


def _sheared_piece_value(g: Group2Step, sym: Symbol, t: float, k: int, v: np.ndarray,
                         points, spec: QuadratureSpec, factor: int = 1) -> np.ndarray:
    """One raw piece integral I_{k,v}[sym](t, .) (no 2pi factor, phase at sheared mu)."""
    if spec.mode == "annulus":
        pts, wts = _annulus_nodes(sym.support, spec.counts(3, factor=factor))
    else:
        bounds = sym.support.box(g.d1, g.d2)
        pts, wts = tensor_rule(bounds, spec.counts(g.d, factor=factor))
    xi, mu_t = pts[:, : g.d1], pts[:, g.d1 :]
    vals = sym.eval(t, xi, mu_t)
    mask = vals != 0
    if not mask.any():
        px, pu = _points_arrays(g, points)
        return np.zeros(px.shape[0], dtype=complex)
    xi, mu_t, wts, vals = xi[mask], mu_t[mask], wts[mask], vals[mask]
    xin = np.linalg.norm(xi, axis=1)
    mus = (2.0 * k * xin[:, None] * np.asarray(v, float)[None, :] + mu_t) / t
    fl = flow_batch(g, t, xi, mus)
    px, pu = _points_arrays(g, points)
    return phase_sum(px, pu, fl.xt, fl.ut, fl.xit, fl.mu, fl.abs_jmu, wts * vals)


@dataclass
class DecPeriodicResult:
    lhs: np.ndarray
    rhs: np.ndarray
    discrepancy: float
    pieces: int
    k_range: tuple


def dec_periodic_check(g: Group2Step, q: Symbol, t: float, points, kappa: float,
                       spec: QuadratureSpec, piece_spec: QuadratureSpec = None,
                       c: float = 0.25, seed: int = 0,
                       decomposition: MuSectorDecomposition = None) -> DecPeriodicResult:
    """Verify I[q](t, .) = |t|^(1/2 - d2) sum_{k,v} I_{k,v}[q_{k,v,T,kappa}](t, .).

    Both sides are the same integral after a change of variables and two
    partitions of unity, so the reported discrepancy is pure quadrature error.
    Pieces whose sheared frequency band cannot meet the support of q are
    skipped; the skipped ones are identically zero.
    """
    T = abs(t)
    if T < 16.0 * kappa**2:
        raise ValueError("need |t| >= 16 kappa^2")
    if piece_spec is None:
        piece_spec = spec
    dec = decomposition or make_mu_sectors(g.d2, T, kappa, c=c, seed=seed)

    lhs = kernel_values(g, build_node_table(g, q, t, spec), points)

    k_lo, k_hi = shear_k_window(t, kappa)
    rlo, rhi = q.support.ratio_band
    rhs = np.zeros(len(lhs), dtype=complex)
    pieces = 0
    for k in range(max(2, int(math.floor(k_lo))), int(math.ceil(k_hi)) + 1):
        # |mu^{t,k,v}|/|xi| lies in [(2k-2)/|t|, (2k+2)/|t|] on the chi_+ support
        if (2.0 * k + 2.0) / T < rlo or (2.0 * k - 2.0) / T > rhi:
            continue
        for v in dec.sectors:
            sym = sheared_symbol(g, q, t, k, v, dec)
            rhs += _sheared_piece_value(g, sym, t, k, v, points, piece_spec)
            pieces += 1
    rhs *= T ** (0.5 - g.d2)
    disc = float(np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + EPS_RESIDUAL)))
    return DecPeriodicResult(lhs=lhs, rhs=rhs, discrepancy=disc, pieces=pieces,
                             k_range=(k_lo, k_hi))


# ---------------------------------------------------------------------------
# L1 growth study


@dataclass
class L1Study:
    ms: list
    norms: list
    slope: float
    grid_shapes: list = field(default_factory=list)
    refine_change: dict = field(default_factory=dict)


def _grid_kernel_l1(g: Group2Step, table: NodeTable, x_extent: float, u_extent: float,
                    dx: float, du: float) -> tuple:
    """L1 norm of the kernel over a centered anisotropic grid (d2 = 1 scalar-|J| path).

    Splits the node sum per mu-slice and evaluates the x-dependence as a
    complex matrix product over the tensor x-grid; identical summands to the
    generic path, reassociated for speed.
    """
    fl = table.flow
    x1 = np.arange(-x_extent + 0.5 * dx, x_extent, dx)
    x2 = x1
    ug = np.arange(-u_extent + 0.5 * du, u_extent, du)
    n1, n2, nu = len(x1), len(x2), len(ug)
    out = np.zeros((n1, n2, nu), dtype=complex)
    mus = fl.mu[:, 0]
    x1sq = x1 * x1
    x2sq = x2 * x2
    for mu_val in np.unique(mus):
        sl = mus == mu_val
        absmu = abs(mu_val)
        xt = fl.xt[sl]
        xit = fl.xit[sl]
        ut = fl.ut[sl, 0]
        cs = table.coeff[sl] * np.exp(
            -1j * np.einsum("ia,ia->i", xt, xit)
            - 1j * ut * mu_val
            - 0.25 * absmu * np.einsum("ia,ia->i", xt, xt)
        )
        w1 = 1j * xit[:, 0] + 0.5 * absmu * xt[:, 0]
        w2 = 1j * xit[:, 1] + 0.5 * absmu * xt[:, 1]
        E1 = np.exp(np.outer(x1, w1))
        E2 = np.exp(np.outer(x2, w2))
        T_s = (E1 * cs) @ E2.T
        damp = np.exp(-0.25 * absmu * (x1sq[:, None] + x2sq[None, :]))
        out += (T_s * damp)[:, :, None] * np.exp(1j * mu_val * ug)[None, None, :]
    l1 = float(np.sum(np.abs(out)) * dx * dx * du)
    return l1, (n1, n2, nu)


def l1_growth_study(g: Group2Step, m_list, t: float, ball_radius: float,
                    grid_scale: float = 0.5, nodes_xi: int = 64, nodes_mu: int = 48,
                    cutoffs=None, check_refine: bool = True) -> L1Study:
    """Fit log2 of the in-ball L1 norm of I[q_m](t, .) against the scale m.

    Restricted to d2 = 1 groups with -Jbar^2 = I (the Heisenberg case the
    study targets); the x/u grid resolution is proportional to 2^-m.
    """
    if g.d2 != 1 or not g.is_htype:
        raise ValueError("the L1 study path requires a Heisenberg-type group with d2 = 1")
    from .decompose import make_cutoffs

    cutoffs = cutoffs or make_cutoffs()
    norms, shapes, refine = [], [], {}
    for m in m_list:
        q = band_symbol(g, cutoffs, m, h=0)
        # node counts scale mildly with m to keep the oscillation resolved
        counts = [max(16, nodes_xi)] * g.d1 + [max(12, nodes_mu)]
        spec = QuadratureSpec(nodes_per_dim=max(16, nodes_xi), axis_counts=counts)
        table = build_node_table(g, q, t, spec)
        u_extent = float(np.max(np.abs(table.flow.ut))) + 0.5
        dx = grid_scale * 2.0 ** (-m)
        du = grid_scale * 2.0 ** (-m)
        l1, shape = _grid_kernel_l1(g, table, ball_radius, u_extent, dx, du)
        norms.append(l1)
        shapes.append(shape)
        if check_refine and m <= min(m_list) + 1:
            l1f, _ = _grid_kernel_l1(g, table, ball_radius, u_extent, dx / 2, du / 2)
            refine[m] = abs(l1f - l1) / max(l1f, 1e-300)
    slope = float(np.polyfit(np.asarray(m_list, float), np.log2(norms), 1)[0])
    return L1Study(ms=list(m_list), norms=norms, slope=slope, grid_shapes=shapes,
                   refine_change=refine)


# ---------------------------------------------------------------------------
# parametrix residual study


@dataclass
class ParametrixStudy:
    N: int
    t_grid: list
    sup_remainder: list          # sup |I[Lambda Lambda_I^j q]| over the grid, j = 0..N
    cos_partial: dict            # t -> partial-sum values at the points
    sin_partial: dict            # t -> sine-propagator partial sums
    leading: dict                # t -> I[q0] values


def parametrix_residual_study(g: Group2Step, q0: Symbol, N: int, t_grid, points,
                              spec: QuadratureSpec, iterate_kwargs: dict = None) -> ParametrixStudy:
    """Sizes of the remainder generators I[Lambda Lambda_I^j q0] versus the partial sums.

    The verifiable content: the remainder generator shrinks by roughly one
    power of the frequency band per iterate.
    """
    t_max = max(abs(t) for t in t_grid)
    itset = amplitude_iterates(g, q0, N, t_max=t_max, **(iterate_kwargs or {}))

    sup_rem = [0.0] * (N + 1)
    cos_partial, sin_partial, leading = {}, {}, {}
    for t in t_grid:
        plus = {}
        minus = {}
        for sign in (1.0, -1.0):
            tt = sign * t
            table = build_node_table(g, q0, tt, spec)
            fl = table.flow
            base = table.norm_const * table.weights * fl.dphi
            store = plus if sign > 0 else minus
            for j, sym in enumerate(itset.iterates):
                qv = sym.eval(tt, fl.xi, fl.mu)
                store[("I", j)] = _psum(g, fl, base * qv, points)
                ring = apply_ringring_batch(g, sym, tt, fl.xi, fl.mu, table=fl)
                store[("ring", j)] = _psum(g, fl, base * ring, points)
                lam = apply_lambda_batch(g, sym, tt, fl.xi, fl.mu, table=fl)
                rem = _psum(g, fl, base * lam, points)
                if sign > 0:
                    sup_rem[j] = max(sup_rem[j], float(np.max(np.abs(rem))))
        cos_partial[t] = 0.5 * sum(plus[("I", j)] + minus[("I", j)] for j in range(N + 1))
        sin_partial[t] = -0.5 / 1j * sum(
            plus[("ring", j)] - minus[("ring", j)] for j in range(N + 1)
        )
        leading[t] = plus[("I", 0)]
    return ParametrixStudy(N=N, t_grid=list(t_grid), sup_remainder=sup_rem,
                           cos_partial=cos_partial, sin_partial=sin_partial,
                           leading=leading)


def _psum(g, fl, coeff, points):
    px, pu = _points_arrays(g, points)
    return phase_sum(px, pu, fl.xt, fl.ut, fl.xit, fl.mu, fl.abs_jmu, coeff)
