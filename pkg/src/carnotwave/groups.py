"""2-step Carnot groups given by their bracket tensor.

A group is the data (d1, d2, B) with B[k][i][j] the coefficient of x_i x'_j
in the k-th second-layer component of [x, x'].  Everything else - the maps
J_mu, their absolute values |J_mu|, kernel projectors, the group law and the
cotangent action of left translations - is derived from B.

The J_mu orientation is fixed by the defining identity
    <J_mu x, x'> = mu . [x, x']
which forces J_mu = sum_k mu_k B[k]^T.
"""

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import RankDrop
from .rng import make_rng, unit_vectors

RANK_TOL = 1e-9          # singular values below RANK_TOL * smax count as zero
HTYPE_TOL = 1e-10
CLASSIFY_SAMPLES = 200   # unit-mu samples for rank/Metivier/H-type classification


@dataclass
class Point:
    """A group element (x, u) in exponential coordinates."""

    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.u))):
            raise ValueError("point components must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.u])


@dataclass
class Covector:
    """A frequency variable (xi, mu) dual to (x, u)."""

    xi: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if not (np.all(np.isfinite(self.xi)) and np.all(np.isfinite(self.mu))):
            raise ValueError("covector components must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.mu])

    def xi_norm(self) -> float:
        return float(np.linalg.norm(self.xi))

    def mu_norm(self) -> float:
        return float(np.linalg.norm(self.mu))

    def xi_bar(self) -> np.ndarray:
        return self.xi / self.xi_norm()

    def mu_bar(self) -> np.ndarray:
        return self.mu / self.mu_norm()

    def theta(self, t: float) -> float:
        """The flow parameter t|mu| / (2|xi|)."""
        return 0.5 * t * self.mu_norm() / self.xi_norm()


@dataclass
class GroupClassification:
    max_rank: int
    is_metivier: bool
    is_htype: bool
    omega_witness: np.ndarray | None = None

    def __post_init__(self):
        if self.is_htype and not self.is_metivier:
            raise ValueError("H-type implies Metivier")


@dataclass
class Group2Step:
    """A 2-step Carnot group; immutable after construction."""

    d1: int
    d2: int
    bracket: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("layer dimensions must be positive")
        B = np.asarray(self.bracket, dtype=float)
        if B.shape != (self.d2, self.d1, self.d1):
            raise ValueError(f"bracket tensor must have shape ({self.d2}, {self.d1}, {self.d1})")
        asym = B + np.transpose(B, (0, 2, 1))
        if np.abs(asym).max() > 1e-12:
            k, i, j = np.unravel_index(int(np.abs(asym).argmax()), asym.shape)
            raise ValueError(
                f"bracket tensor is not antisymmetric at component (k={k}, i={i}, j={j})"
            )
        # [g1, g1] must span the whole second layer
        flat = B.reshape(self.d2, -1)
        if np.linalg.matrix_rank(flat, tol=1e-10) < self.d2:
            raise ValueError("bracket does not surject onto the second layer")
        self.bracket = B

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def homogeneous_dimension(self) -> int:
        return self.d1 + 2 * self.d2

    @cached_property
    def j_basis(self) -> np.ndarray:
        """Stack of J_{e_k}, shape (d2, d1, d1)."""
        return np.ascontiguousarray(np.transpose(self.bracket, (0, 2, 1)))

    def lie_bracket(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.bracket, x, y)

    @cached_property
    def max_rank(self) -> int:
        return self.classification.max_rank

    @cached_property
    def classification(self) -> GroupClassification:
        return classify(self, CLASSIFY_SAMPLES, seed=2 * 10**9 + 17)

    @property
    def is_metivier(self) -> bool:
        return self.classification.is_metivier

    @property
    def is_htype(self) -> bool:
        return self.classification.is_htype


def j_mu(g: Group2Step, mu: np.ndarray) -> np.ndarray:
    """The skew map on the first layer with <j_mu(mu) x, x'> = mu.[x, x']."""
    mu = np.asarray(mu, dtype=float)
    return np.einsum("k,kij->ij", mu, g.j_basis)


def j_mu_batch(g: Group2Step, mu: np.ndarray) -> np.ndarray:
    """j_mu for a stack of mu vectors, shape (n, d2) -> (n, d1, d1)."""
    return np.einsum("nk,kij->nij", np.asarray(mu, dtype=float), g.j_basis)


def abs_j_mu(g: Group2Step, mu: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of -j_mu(mu)^2.

    Computed by symmetric eigendecomposition with round-off eigenvalues
    clamped at zero, which stays robust for repeated or zero eigenvalues;
    eigenvalues within machine noise of zero are zeroed exactly so the
    kernel modes of J do not pollute the square root with sqrt(eps) noise.
    """
    J = j_mu(g, mu)
    B = -J @ J
    lam, V = np.linalg.eigh(B)
    lam = _clamp_spectrum(lam)
    return (V * np.sqrt(lam)) @ V.T


def _clamp_spectrum(lam: np.ndarray) -> np.ndarray:
    top = np.max(lam, axis=-1, keepdims=True)
    floor = 64.0 * np.finfo(float).eps * np.maximum(top, 0.0)
    return np.where(lam <= floor, 0.0, lam)


def abs_j_mu_batch(g: Group2Step, mu: np.ndarray) -> np.ndarray:
    J = j_mu_batch(g, mu)
    B = -np.einsum("nij,njk->nik", J, J)
    lam, V = np.linalg.eigh(B)
    lam = _clamp_spectrum(lam)
    return np.einsum("nij,nj,nkj->nik", V, np.sqrt(lam), V)


def _char_poly_coeffs(B: np.ndarray) -> np.ndarray:
    """Faddeev-LeVerrier coefficients a with det(lam I - B) = lam^n + sum a_k lam^(n-k)."""
    n = B.shape[0]
    a = np.zeros(n + 1)
    a[0] = 1.0
    M = np.zeros_like(B)
    for k in range(1, n + 1):
        M = B @ (M + a[k - 1] * np.eye(n)) if k > 1 else B.copy()
        a[k] = -np.trace(M) / k
    return a


def kernel_projector(g: Group2Step, mu: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthogonal projector onto Ker j_mu(mu) via the characteristic-polynomial formula.

    With B = -J^2 and e_k the elementary symmetric functions of its spectrum
    (obtained from the characteristic polynomial, no eigendecomposition), the
    projector is sum_j (-1)^j e_{r-j} B^j / e_r where r is the generic maximal
    rank of J over the group.  Raises RankDrop when rk J_mu < r.
    """
    J = j_mu(g, mu)
    r = g.max_rank
    svals = np.linalg.svd(J, compute_uv=False)
    smax = svals[0] if svals.size else 0.0
    rank_here = int(np.sum(svals > rank_tol * max(smax, 1e-300)))
    if smax == 0.0 or rank_here < r:
        raise RankDrop(f"rk J_mu = {rank_here} < generic rank {r}")
    B = -J @ J
    a = _char_poly_coeffs(B)
    d1 = g.d1
    # e_k = (-1)^k a_k; p_j in det(B - lam I) = sum_j (-1)^j p_j lam^j is e_{d1-j}
    e = np.array([(-1.0) ** k * a[k] for k in range(d1 + 1)])
    P = np.zeros((d1, d1))
    Bpow = np.eye(d1)
    for j in range(0, r + 1):
        P += (-1.0) ** j * e[r - j] * Bpow
        if j < r:
            Bpow = Bpow @ B
    return P / e[r]


def kernel_projector_svd(g: Group2Step, mu: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Null-space projector of j_mu via SVD; independent cross-check route."""
    J = j_mu(g, mu)
    U, s, Vt = np.linalg.svd(J)
    smax = s[0] if s.size else 0.0
    null_mask = s <= rank_tol * max(smax, 1e-300)
    Vnull = Vt[null_mask].T
    return Vnull @ Vnull.T


def classify(g: Group2Step, sample_count: int, seed: int = 0, tol: float = RANK_TOL) -> GroupClassification:
    """Sampled structural classification over unit mu directions.

    The maximal-rank set is Zariski-open, so random sampling detects the
    generic rank with overwhelming probability; contrived groups whose rank
    drops only on large measure-zero sets can in principle be misreported.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = make_rng(seed, 11)
    mus = unit_vectors(rng, sample_count, g.d2)
    # include the coordinate directions for reproducibility on tiny samples
    mus = np.vstack([np.eye(g.d2), mus])
    J = j_mu_batch(g, mus)
    svals = np.linalg.svd(J, compute_uv=False)
    smax_global = float(svals.max())
    ranks = (svals > tol * smax_global).sum(axis=1)
    max_rank = int(ranks.max())
    is_metivier = bool(svals[:, -1].min() > tol * smax_global) and max_rank == g.d1
    JJ = np.einsum("nij,njk->nik", J, J)
    htype_dev = np.abs(JJ + np.eye(g.d1)).max()
    is_htype = bool(htype_dev <= max(HTYPE_TOL, tol)) and is_metivier
    witness = None
    drop = np.nonzero(ranks < max_rank)[0]
    if drop.size:
        witness = mus[drop[0]]
    return GroupClassification(max_rank, is_metivier, is_htype, witness)


def group_multiply(g: Group2Step, a: Point, b: Point) -> Point:
    """Group law (x, u).(x', u') = (x + x', u + u' + [x, x']/2)."""
    return Point(a.x + b.x, a.u + b.u + 0.5 * g.lie_bracket(a.x, b.x))


def group_inverse(a: Point) -> Point:
    return Point(-a.x, -a.u)


def dilate(r: float, p: Point) -> Point:
    """Automorphic dilation (x, u) -> (r x, r^2 u)."""
    return Point(r * p.x, r * r * p.u)


def cotangent_translate(g: Group2Step, y: Point, cov: Covector) -> Covector:
    """Action of the left translation by y on covectors: (xi, mu) -> (xi - J_mu y/2, mu)."""
    return Covector(cov.xi - 0.5 * j_mu(g, cov.mu) @ y.x, cov.mu)


def cotangent_translate_inv(g: Group2Step, y: Point, cov: Covector) -> Covector:
    return Covector(cov.xi + 0.5 * j_mu(g, cov.mu) @ y.x, cov.mu)


# ---------------------------------------------------------------------------
# built-in groups


def heisenberg() -> Group2Step:
    """The 3-dimensional Heisenberg group, [e1, e2] = u1."""
    B = np.zeros((1, 2, 2))
    B[0, 0, 1] = 1.0
    B[0, 1, 0] = -1.0
    return Group2Step(2, 1, B, name="heisenberg")


def heisenberg_nonisotropic() -> Group2Step:
    """d1 = 4 Heisenberg-like group whose J has eigenvalue pairs {1, 2}."""
    B = np.zeros((1, 4, 4))
    B[0, 0, 1] = 1.0
    B[0, 1, 0] = -1.0
    B[0, 2, 3] = 2.0
    B[0, 3, 2] = -2.0
    return Group2Step(4, 1, B, name="heisenberg-nonisotropic")


def htype_quaternion() -> Group2Step:
    """The quaternionic H-type group: J_{e_k} is left multiplication by i, j, k on H."""
    Li = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
    Lj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
    Lk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
    B = np.stack([Li.T, Lj.T, Lk.T])  # J_mu = sum mu_k B[k]^T
    return Group2Step(4, 3, B, name="htype-quaternion")


def free_two_step_3() -> Group2Step:
    """Free 2-step group on 3 generators; non-Metivier control case."""
    B = np.zeros((3, 3, 3))
    pairs = [(0, 1), (0, 2), (1, 2)]
    for k, (i, j) in enumerate(pairs):
        B[k, i, j] = 1.0
        B[k, j, i] = -1.0
    return Group2Step(3, 3, B, name="free3")


BUILTIN_GROUPS = {
    "heisenberg": heisenberg,
    "heisenberg-nonisotropic": heisenberg_nonisotropic,
    "htype-quaternion": htype_quaternion,
    "free3": free_two_step_3,
}


def group_to_dict(g: Group2Step) -> dict:
    return {"d1": g.d1, "d2": g.d2, "bracket": g.bracket.tolist(), "name": g.name}


def group_from_dict(data: dict) -> Group2Step:
    return Group2Step(
        int(data["d1"]),
        int(data["d2"]),
        np.asarray(data["bracket"], dtype=float),
        name=str(data.get("name", "")),
    )


def load_group(source: str) -> Group2Step:
    """Resolve a builtin name or a JSON group-definition file."""
    if source in BUILTIN_GROUPS:
        return BUILTIN_GROUPS[source]()
    with open(source) as fh:
        return group_from_dict(json.load(fh))
