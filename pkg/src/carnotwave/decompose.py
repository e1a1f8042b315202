"""Dyadic, angular and mu-sector decompositions.

The construction choices (mollifier-based cutoffs, greedy sphere packings
with Shepard-normalized bump weights, a smoothed-step additive cutoff) make
every asserted partition/support/count property directly testable.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroFrequency, ZeroTime
from .groups import Covector, Group2Step
from .kernels import greedy_pack
from .rng import make_rng

DEFAULT_SEPARATION = 0.25


# ---------------------------------------------------------------------------
# smooth cutoff machinery


def _expbump(x: np.ndarray, sharpness: float = 1.0) -> np.ndarray:
    """exp(-sharpness/x) for x > 0, else 0; the standard mollifier block."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-sharpness / x[pos])
    return out


def smoothstep(x, sharpness: float = 1.0):
    """C^infinity step: 0 for x <= 0, 1 for x >= 1, symmetric about 1/2."""
    x = np.asarray(x, dtype=float)
    a = _expbump(x, sharpness)
    b = _expbump(1.0 - x, sharpness)
    with np.errstate(invalid="ignore"):
        out = np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, a / np.where(a + b == 0, 1.0, a + b)))
    return out


def smooth_window(lo_out: float, lo_in: float, hi_in: float, hi_out: float, sharpness: float = 1.0):
    """Smooth plateau cutoff: 1 on [lo_in, hi_in], supported in [lo_out, hi_out]."""

    def w(s):
        s = np.asarray(s, dtype=float)
        up = smoothstep((s - lo_out) / (lo_in - lo_out), sharpness)
        dn = 1.0 - smoothstep((s - hi_in) / (hi_out - hi_in), sharpness)
        return up * dn

    return w


@dataclass
class DyadicCutoffs:
    """chi1 / chi0 / chi1_tilde of the dyadic partition of unity."""

    chi1: callable
    chi0: callable
    chi1_tilde: callable
    sharpness: float = 1.0


def make_cutoffs(transition_sharpness: float = 1.0) -> DyadicCutoffs:
    """Mollifier-based cutoffs with chi0 + sum_k chi1(2^-k .) = 1.

    chi1(s) = psi(|s|) - psi(2|s|) for a smooth step psi equal to 1 on [0, 1]
    and 0 on [2, inf); the partition identity telescopes exactly (power-of-two
    scalings are exact in floating point).  chi1_tilde is an even plateau
    equal to 1 on +-[1/2, 2] so that chi1_tilde * chi1 = chi1 everywhere.
    """
    if transition_sharpness <= 0:
        raise ValueError("sharpness must be positive")
    s0 = transition_sharpness

    def psi(r):
        r = np.abs(np.asarray(r, dtype=float))
        return 1.0 - smoothstep(r - 1.0, s0)

    def chi1(s):
        s = np.abs(np.asarray(s, dtype=float))
        return psi(s) - psi(2.0 * s)

    def chi0(s):
        s = np.abs(np.asarray(s, dtype=float))
        return psi(2.0 * s)

    tilde_window = smooth_window(0.25, 0.5, 2.0, 4.0, s0)

    def chi1_tilde(s):
        return tilde_window(np.abs(np.asarray(s, dtype=float)))

    return DyadicCutoffs(chi1=chi1, chi0=chi0, chi1_tilde=chi1_tilde, sharpness=s0)


def additive_cutoff(sharpness: float = 1.0):
    """Even chi_+ with support [-1, 1], 0 <= chi_+ <= 1 and sum_k chi_+(s - k) = 1."""

    def chi_plus(s):
        s = np.asarray(s, dtype=float)
        return smoothstep(s + 1.0, sharpness) - smoothstep(s, sharpness)

    return chi_plus


# ---------------------------------------------------------------------------
# quasi-uniform streams on spheres


def _circle_stream(n: int) -> np.ndarray:
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    angles = 2.0 * np.pi * ((np.arange(n) * golden) % 1.0)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - math.sqrt(5.0))
    ang = golden * i
    return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=1)


def sphere_stream(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-random stream of unit vectors driving the greedy packer."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        return _circle_stream(count)
    if dim == 3:
        return _fibonacci_sphere(count)
    rng = make_rng(seed, 31, dim)
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _bump_profile(r2: np.ndarray) -> np.ndarray:
    """exp(-1/(1-r^2)) on r^2 < 1, else 0 (r2 is the squared normalized radius)."""
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


class _SphereWeights:
    """Shepard-normalized bump weights around a set of unit centers.

    The cell-hash index over the centers is built lazily: count-only uses of
    a decomposition never pay for it.
    """

    def __init__(self, centers: np.ndarray, radius: float):
        self.centers = centers
        self.radius = float(radius)
        self._cell = self.radius
        self._buckets = None
        k = centers.shape[1]
        self._offsets = np.stack(
            np.meshgrid(*([[-1, 0, 1]] * k), indexing="ij"), axis=-1
        ).reshape(-1, k)

    def _ensure_index(self):
        if self._buckets is None:
            keys = np.floor(self.centers / self._cell).astype(np.int64)
            self._buckets = {}
            for i, key in enumerate(map(tuple, keys)):
                self._buckets.setdefault(key, []).append(i)

    def neighbors(self, unit: np.ndarray) -> np.ndarray:
        self._ensure_index()
        base = np.floor(unit / self._cell).astype(np.int64)
        idx: list = []
        for off in self._offsets:
            idx.extend(self._buckets.get(tuple(base + off), ()))
        return np.asarray(idx, dtype=np.int64)

    def weights_at(self, points: np.ndarray):
        """(indices, values) of the nonzero partition weights at each point.

        Points are projected to the sphere first (weights are 0-homogeneous).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        units = points / np.linalg.norm(points, axis=1, keepdims=True)
        out = []
        for unit in units:
            idx = self.neighbors(unit)
            if idx.size == 0:
                out.append((idx, np.zeros(0)))
                continue
            diff = self.centers[idx] - unit
            r2 = np.sum(diff * diff, axis=1) / (self.radius * self.radius)
            vals = _bump_profile(r2)
            nz = vals > 0.0
            idx, vals = idx[nz], vals[nz]
            total = vals.sum()
            if total > 0:
                vals = vals / total
            out.append((idx, vals))
        return out

    def weight_of(self, index: int, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        res = np.zeros(points.shape[0])
        for row, (idx, vals) in enumerate(self.weights_at(points)):
            hit = np.nonzero(idx == index)[0]
            if hit.size:
                res[row] = vals[hit[0]]
        return res


@dataclass
class DirectionSet:
    """Angular decomposition at dyadic scale m: centers and partition weights."""

    m: int
    directions: np.ndarray           # (N, d) unit vectors
    separation: float
    bump_radius: float
    _weights: _SphereWeights = field(repr=False, default=None)

    def __len__(self):
        return self.directions.shape[0]

    def weights_at(self, points: np.ndarray):
        return self._weights.weights_at(points)

    def weight_of(self, index: int, points: np.ndarray) -> np.ndarray:
        return self._weights.weight_of(index, points)

    def partition_sum(self, points: np.ndarray) -> np.ndarray:
        return np.array([vals.sum() for _, vals in self.weights_at(points)])


def make_directions(d: int, m: int, c: float = DEFAULT_SEPARATION, seed: int = 0) -> DirectionSet:
    """Greedy maximal c 2^{-m/2}-separated packing with Shepard bump weights.

    The packing is maximal over a quasi-uniform stream that is itself denser
    than the separation, so it covers the sphere at twice the separation and
    the Shepard denominators stay positive.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    if m < 0:
        raise ValueError("need m >= 0")
    sep = c * 2.0 ** (-m / 2.0)
    count = int(np.ceil(6.0 * (4.0 / sep) ** (d - 1)))
    stream = sphere_stream(d, count, seed=seed)
    mask = greedy_pack(stream, sep)
    centers = stream[mask]
    ds = DirectionSet(m=m, directions=centers, separation=sep, bump_radius=2.0 * sep)
    ds._weights = _SphereWeights(centers, 2.0 * sep)
    return ds


def direction_count_slope(d: int, m_list, c: float = DEFAULT_SEPARATION, seed: int = 0):
    """Fit log2(#Z_m) against m; returns (slope, counts)."""
    counts = [len(make_directions(d, m, c=c, seed=seed)) for m in m_list]
    slope = np.polyfit(np.asarray(m_list, dtype=float), np.log2(counts), 1)[0]
    return float(slope), counts


# ---------------------------------------------------------------------------
# large-time mu-sector decomposition


@dataclass
class MuSectorDecomposition:
    """Sectors of angular aperture ~1/T in the mu variable, plus cutoffs."""

    T: float
    kappa: float
    c: float
    sectors: np.ndarray             # (N, d2) unit vectors
    plus_cutoff: callable
    time_cutoff: callable
    _weights: _SphereWeights = field(repr=False, default=None)

    def __len__(self):
        return self.sectors.shape[0]

    def sector_weight(self, v_index: int, mu: np.ndarray) -> np.ndarray:
        """chi_{T,kappa,v} at mu (0-homogeneous; mu must be nonzero rows)."""
        mu = np.atleast_2d(np.asarray(mu, dtype=float))
        if self.sectors.shape[1] == 1:
            v = self.sectors[v_index, 0]
            return (np.sign(mu[:, 0]) == np.sign(v)).astype(float)
        return self._weights.weight_of(v_index, mu)

    def sector_weights_sum(self, mu: np.ndarray) -> np.ndarray:
        mu = np.atleast_2d(np.asarray(mu, dtype=float))
        if self.sectors.shape[1] == 1:
            return np.ones(mu.shape[0])
        return np.array([vals.sum() for _, vals in self._weights.weights_at(mu)])

    def sector_index(self, v: np.ndarray) -> int:
        """Index of the sector whose center matches the unit vector v."""
        v = np.asarray(v, dtype=float)
        idx = int(np.argmax(self.sectors @ v))
        if not np.allclose(self.sectors[idx], v, atol=1e-12):
            raise ValueError("v is not a sector center of this decomposition")
        return idx


def make_mu_sectors(d2: int, T: float, kappa: float, c: float = DEFAULT_SEPARATION,
                    seed: int = 0, sharpness: float = 1.0) -> MuSectorDecomposition:
    """Sector decomposition of the mu-sphere with aperture bound c/T.

    Sector supports satisfy |mu_v^perp|/|mu| <= c/T and mu_v^parallel > 0.
    For d2 = 1 the sectors are the two half-lines; for d2 in {2, 3} the
    centers are structured quasi-uniform sets (uniform angles, spherical
    Fibonacci) whose covering radius stays below the bump radius, so the
    Shepard denominators are positive without any packing pass -- the count
    would make a greedy construction hopeless at large T.
    """
    if T <= 0 or kappa <= 1:
        raise ValueError("need T > 0 and kappa > 1")
    if not (0 < c <= 0.5):
        raise ValueError("c must lie in (0, 1/2]")
    radius = c / T
    if d2 == 1:
        sectors = np.array([[1.0], [-1.0]])
        weights = None
    elif d2 == 2:
        n = int(np.ceil(np.pi / (0.45 * radius)))
        ang = 2.0 * np.pi * np.arange(n) / n
        sectors = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        weights = _SphereWeights(sectors, radius)
    elif d2 == 3:
        # spherical Fibonacci covering radius is ~2.8/sqrt(N)
        n = int(np.ceil((3.1 / (0.85 * radius)) ** 2))
        sectors = _fibonacci_sphere(n)
        weights = _SphereWeights(sectors, radius)
    else:
        sep = 0.45 * radius
        count = int(np.ceil(6.0 * (4.0 / sep) ** (d2 - 1)))
        if count > 20_000_000:
            raise ValueError("sector construction too large for d2 > 3 at this T")
        stream = sphere_stream(d2, count, seed=seed)
        mask = greedy_pack(stream, sep)
        sectors = stream[mask]
        weights = _SphereWeights(sectors, radius)
    dec = MuSectorDecomposition(
        T=float(T), kappa=float(kappa), c=float(c), sectors=sectors,
        plus_cutoff=additive_cutoff(sharpness),
        time_cutoff=smooth_window(0.5 / kappa, 1.0 / kappa, kappa, 2.0 * kappa, sharpness),
    )
    dec._weights = weights
    return dec


def mu_shear(g: Group2Step, t: float, k: int, v: np.ndarray, cov: Covector) -> Covector:
    """The change of variables mu -> (2 k |xi| v + mu) / t."""
    if t == 0.0:
        raise ZeroTime("mu shear needs t != 0")
    xin = cov.xi_norm()
    if xin == 0.0:
        raise ZeroFrequency("mu shear needs xi != 0")
    v = np.asarray(v, dtype=float)
    return Covector(cov.xi, (2.0 * k * xin * v + cov.mu) / t)


def mu_unshear(g: Group2Step, t: float, k: int, v: np.ndarray, cov: Covector) -> Covector:
    """Inverse of mu_shear."""
    if t == 0.0:
        raise ZeroTime("mu shear needs t != 0")
    xin = cov.xi_norm()
    if xin == 0.0:
        raise ZeroFrequency("mu shear needs xi != 0")
    v = np.asarray(v, dtype=float)
    return Covector(cov.xi, t * cov.mu - 2.0 * k * xin * v)


def shear_k_window(t: float, kappa: float):
    """The k-range (|t|/(8 kappa), kappa |t|) outside which sheared pieces vanish."""
    return abs(t) / (8.0 * kappa), kappa * abs(t)


def sheared_symbol(g: Group2Step, q, t: float, k: int, v: np.ndarray,
                   decomposition: MuSectorDecomposition):
    """The composed symbol of one (k, v) piece of the large-time decomposition.

    Composes q at the sheared frequency with the time window, the sector
    cutoff, the additive cutoff in theta_v = mu_v^par/(2|xi|), and the
    rescaled density |t|^{-1/2} d_phi(t, (xi, mu^{t,k,v})); the (2 pi)^{-d}
    normalization of the original kernel is folded in, so the raw oscillatory
    integral of exp(i phase_{k,v}) times this symbol is one summand of the
    decomposition identity.
    """
    import warnings

    from .flow import flow_batch  # local import avoids a cycle at module load
    from .transport import Symbol, SupportRegion

    if abs(t) / decomposition.T > 2.0 * decomposition.kappa:
        raise ValueError("t outside the decomposition's time window")
    # |mu_t| <= |mu_t^par| + |mu_t^perp| <= 2|xi| sqrt(1 + (c kappa)^2) must
    # stay below 5|xi|/2, which needs c * kappa <= 3/4
    if decomposition.c * decomposition.kappa > 0.75:
        warnings.warn(
            "sector aperture constant c too large for the declared 5|xi|/2 "
            "support bound; shrink c or kappa",
            stacklevel=2,
        )
    v = np.asarray(v, dtype=float)
    v_idx = decomposition.sector_index(v)
    T, kappa = decomposition.T, decomposition.kappa
    d = g.d1 + g.d2
    norm_const = (2.0 * np.pi) ** (-d)

    def fn(tt, xi, mu_t):
        n = xi.shape[0]
        if tt == 0.0:
            return np.zeros(n, dtype=complex)
        sgn = 1.0 if tt > 0 else -1.0
        xin = np.linalg.norm(xi, axis=1)
        mus = (2.0 * k * xin[:, None] * v[None, :] + mu_t) / tt
        out = np.zeros(n, dtype=complex)
        tw = float(decomposition.time_cutoff(np.array([abs(tt) / T]))[0])
        if tw == 0.0:
            return out
        theta_v = (mu_t @ v) / (2.0 * xin)
        chip = decomposition.plus_cutoff(theta_v)
        qv = q.eval(tt, xi, mus)
        live = (np.abs(qv) > 0) & (chip > 0)
        if not live.any():
            return out
        sector = np.zeros(n)
        sector[live] = decomposition.sector_weight(v_idx, sgn * mus[live])
        live &= sector > 0
        if not live.any():
            return out
        dens = flow_batch(g, tt, xi[live], mus[live]).dphi / np.sqrt(abs(tt))
        out[live] = norm_const * tw * qv[live] * chip[live] * sector[live] * dens
        return out

    xi_lo = max(1.0 / kappa, q.support.xi_band[0])
    xi_hi = q.support.xi_band[1]
    support = SupportRegion(
        xi_band=(xi_lo, xi_hi), ratio_band=(0.0, 2.5), kappa=kappa,
        mu_band=(0.0, 2.0 * xi_hi),  # chi_+ support: |mu_t| <= 2 |xi|
    )
    return Symbol(
        fn=fn, order_t=q.order_t, order_xi=q.order_xi, support=support,
        t_independent=False, name=f"sheared[k={k}]",
    )
