"""Standard symbol constructors used by the kernel studies and tests."""

import numpy as np

from .decompose import DyadicCutoffs, smooth_window
from .groups import Group2Step, abs_j_mu_batch
from .transport import SupportRegion, Symbol

_H = 1e-5  # 1-d FD step for cutoff derivatives


def _cut_d1(chi, r):
    return (chi(r + _H) - chi(r - _H)) / (2.0 * _H)


def _cut_d2(chi, r):
    return (chi(r + _H) - 2.0 * chi(r) + chi(r - _H)) / (_H * _H)


def band_symbol(g: Group2Step, cutoffs: DyadicCutoffs, m: int, h: int = 0) -> Symbol:
    """The initial-data symbol eta_h(2^-m xi) at dyadic scale m, h in {0, 1}.

    eta_0 = chi1(|xi|) chi1(|mu|); eta_1 applies <|J_mu| D_xi, D_xi> once,
    which for a radial factor reduces to 1-d derivatives of chi1 (taken by
    finite differences) contracted with |J_mu|.
    """
    if h not in (0, 1):
        raise ValueError("only h in {0, 1} is implemented")
    scale = float(2**m)
    chi1 = cutoffs.chi1

    def fn(t, xi, mu):
        xs = xi / scale
        ms = mu / scale
        rxi = np.linalg.norm(xs, axis=1)
        rmu = np.linalg.norm(ms, axis=1)
        base_mu = chi1(rmu)
        if h == 0:
            return (chi1(rxi) * base_mu).astype(complex)
        absJ = abs_j_mu_batch(g, ms)
        xhat = xs / rxi[:, None]
        qform = np.einsum("na,nab,nb->n", xhat, absJ, xhat)
        trj = np.trace(absJ, axis1=1, axis2=2)
        radial = _cut_d2(chi1, rxi) * qform + _cut_d1(chi1, rxi) * (trj - qform) / rxi
        return (-radial * base_mu).astype(complex)

    hi = 2.0 * scale
    support = SupportRegion(
        xi_band=(scale / 2.0, hi), ratio_band=(0.25, 4.0), kappa=4.0,
        box_override=[(-hi, hi)] * (g.d1 + g.d2),  # |mu| <= 2^(m+1) too
        mu_band=(scale / 2.0, hi),
    )
    return Symbol(fn=fn, order_t=0.0, order_xi=0.0, support=support,
                  t_independent=True, name=f"band[m={m},h={h}]")


def gaussian_symbol(g: Group2Step, center_xi: np.ndarray, center_mu: np.ndarray,
                    support: SupportRegion, sigma: float = None,
                    snug_box: bool = True, xi_pad: float = 0.2,
                    ratio_pad: float = 0.15) -> Symbol:
    """Gaussian bump smoothly cut to a support region; the transport test symbol.

    The cutoff windows only bite where the Gaussian tail is already tiny, so
    the product stays effectively analytic (polynomial grids resolve it);
    sigma is clamped to a quarter of the distance from the center to the
    window plateaus.  snug_box tightens the quadrature/memo box to
    center +- 4.5 sigma per axis.
    """
    center = np.concatenate([np.asarray(center_xi, float), np.asarray(center_mu, float)])
    lo, hi = support.xi_band
    rlo, rhi = support.ratio_band
    xi_win = smooth_window(lo, lo + xi_pad * (hi - lo), hi - xi_pad * (hi - lo), hi)
    pad = ratio_pad * (rhi - rlo)
    ratio_win = smooth_window(rlo, rlo + pad, rhi - pad, rhi)
    # keep the Gaussian tail negligible on every window transition, so the
    # product stays polynomial-friendly
    cxin = float(np.linalg.norm(center[: g.d1]))
    crat = float(np.linalg.norm(center[g.d1 :])) / cxin
    margin = min(
        cxin - (lo + xi_pad * (hi - lo)),
        (hi - xi_pad * (hi - lo)) - cxin,
        (crat - (rlo + pad)) * cxin,
        ((rhi - pad) - crat) * cxin,
    )
    if margin <= 0:
        raise ValueError("center must lie inside the window plateau")
    sigma_max = margin / 4.0
    sigma = sigma_max if sigma is None else min(float(sigma), sigma_max)

    def fn(t, xi, mu):
        pts = np.concatenate([xi, mu], axis=1)
        bump = np.exp(-np.sum((pts - center) ** 2, axis=1) / sigma**2)
        xin = np.linalg.norm(xi, axis=1)
        mun = np.linalg.norm(mu, axis=1)
        return (bump * xi_win(xin) * ratio_win(mun / xin)).astype(complex)

    if snug_box:
        support = SupportRegion(
            xi_band=support.xi_band, ratio_band=support.ratio_band, kappa=support.kappa,
            box_override=[(c - 4.5 * sigma, c + 4.5 * sigma) for c in center],
        )
    return Symbol(fn=fn, order_t=0.0, order_xi=0.0, support=support,
                  t_independent=True, name="gaussian")


def ratio_band_symbol(g: Group2Step, cutoffs: DyadicCutoffs, xi_scale: float,
                      kappa: float) -> Symbol:
    """An Omega_kappa-supported order-0 symbol: chi1(|xi|/s) times a ratio window.

    The ratio window sits strictly inside [kappa^-1, kappa]; the |xi| band is
    s * [1/2, 2], so choose s >= 2/kappa to respect |xi| >= kappa^-1.
    """
    if xi_scale < 2.0 / kappa:
        raise ValueError("xi_scale too small for the kappa support constraint")
    chi1 = cutoffs.chi1
    rlo, rhi = 1.0 / kappa, kappa
    pad = 0.2 * (rhi - rlo)
    ratio_win = smooth_window(rlo, rlo + pad, rhi - pad, rhi)

    def fn(t, xi, mu):
        xin = np.linalg.norm(xi, axis=1)
        mun = np.linalg.norm(mu, axis=1)
        return (chi1(xin / xi_scale) * ratio_win(mun / xin)).astype(complex)

    support = SupportRegion(
        xi_band=(xi_scale / 2.0, xi_scale * 2.0), ratio_band=(rlo, rhi), kappa=kappa,
        mu_band=(rlo * xi_scale / 2.0, rhi * xi_scale * 2.0),
    )
    return Symbol(fn=fn, order_t=0.0, order_xi=0.0, support=support,
                  t_independent=True, name=f"ratio-band[{xi_scale}]")
