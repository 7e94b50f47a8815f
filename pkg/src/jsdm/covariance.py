"""Array geometries and structured channel covariances.

The channel of a user whose scatterers are seen from the array under a
narrow azimuth ring (center theta, half-width delta) has covariance

    [R]_{m,p} = gain / (2 delta) * int_{-delta}^{delta}
                exp(j k(alpha + theta)^T (u_m - u_p)) d alpha,

with wave vector k(alpha) = -(2 pi) (cos alpha, sin alpha) for element
positions u_m expressed in carrier wavelengths.  For a uniform linear array
along the y axis this reduces to a Hermitian Toeplitz matrix generated by M
scalar correlations; circular and rectangular arrays are handled through
their element positions and through Kronecker factorization respectively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import toeplitz

from .errors import ConvergenceError, FeasibilityError
from .rng import complex_normal, stream

TRACE_CAPTURE_DEFAULT = 1e-3   # effective rank keeps >= (1 - this) of the trace
RANK_TOL_DEFAULT = 1e-12       # relative eigenvalue threshold for numerical rank


def uca_radius(m: int) -> float:
    """Radius (in wavelengths) putting adjacent ring elements half a wavelength apart."""
    step = 2.0 * np.pi / m
    return 0.5 / np.sqrt((1.0 - np.cos(step)) ** 2 + np.sin(step) ** 2)


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna array layout.

    kind is one of "ula", "uca", "ura".  ``m`` counts elements (the
    horizontal dimension for a rectangular array, whose vertical dimension is
    ``n``).  ``spacing`` is the element spacing in wavelengths for linear
    axes; the circular array instead fixes its radius so that adjacent
    elements are half a wavelength apart.
    """

    kind: str
    m: int
    n: int = 1
    spacing: float = 0.5

    def __post_init__(self):
        if self.kind not in ("ula", "uca", "ura"):
            raise ValueError(f"unknown array kind {self.kind!r}")
        if self.m < 1 or self.n < 1:
            raise ValueError("array dimensions must be positive")
        if self.kind != "ura" and self.n != 1:
            raise ValueError("only rectangular arrays have a vertical dimension")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self) -> int:
        return self.m * self.n

    def positions(self) -> np.ndarray:
        """Element coordinates in wavelengths, shape (size, 3).

        Linear arrays lie along the y axis, the circular array in the x-y
        plane.  Rectangular elements are ordered row-major: element (mh, mv)
        sits at flat index mh * n + mv, horizontal index major.
        """
        if self.kind == "ula":
            pos = np.zeros((self.m, 3))
            pos[:, 1] = self.spacing * np.arange(self.m)
            return pos
        if self.kind == "uca":
            ang = 2.0 * np.pi * np.arange(self.m) / self.m
            r = uca_radius(self.m)
            return np.column_stack([r * np.cos(ang), r * np.sin(ang), np.zeros(self.m)])
        pos = np.zeros((self.m * self.n, 3))
        mh, mv = np.divmod(np.arange(self.m * self.n), self.n)
        pos[:, 1] = self.spacing * mh
        pos[:, 2] = self.spacing * mv
        return pos


@dataclass(frozen=True)
class GroupProfile:
    """Angular profile of one user group: ring center, half-width, mean gain."""

    theta: float
    delta: float
    gain: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.delta <= np.pi):
            raise ValueError("angular half-width must lie in (0, pi]")
        if self.gain <= 0.0:
            raise ValueError("gain must be positive")

    @property
    def interval(self) -> tuple[float, float]:
        return (self.theta - self.delta, self.theta + self.delta)


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance matrix with its eigen-structure and rank summaries.

    U holds the ``rank`` dominant eigenvectors (descending eigenvalues in
    ``lam``); ``r_star`` is the effective rank actually retained by
    reduced-dimension processing.
    """

    R: np.ndarray
    U: np.ndarray
    lam: np.ndarray
    rank: int
    r_star: int
    gain: float = 1.0
    profile: GroupProfile | None = None
    geometry: ArrayGeometry | None = None

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    def dominant(self, r: int | None = None) -> np.ndarray:
        """Eigenvector basis of the r (default r_star) strongest modes."""
        r = self.r_star if r is None else r
        if not (1 <= r <= self.rank):
            raise FeasibilityError(
                f"requested {r} modes but covariance rank is {self.rank}")
        return self.U[:, :r]


def gauss_legendre_vec(f, a: float, b: float, tol: float = 1e-10,
                       n0: int = 32, max_nodes: int = 2 ** 13) -> np.ndarray:
    """Integrate a vector-valued function over [a, b] to absolute tolerance.

    ``f`` maps an array of nodes (n,) to values (..., n).  The Gauss-Legendre
    rule is refined by doubling the node count until successive estimates
    agree elementwise within ``tol``.
    """
    n = n0
    prev = None
    while n <= max_nodes:
        x, w = leggauss(n)
        nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
        vals = f(nodes) @ (0.5 * (b - a) * w)
        if prev is not None and np.max(np.abs(vals - prev)) < tol:
            return vals
        prev = vals
        n *= 2
    raise ConvergenceError(
        f"quadrature did not reach tol={tol:g} with {max_nodes} nodes")


def ula_correlations(m: int, spacing: float, profile: GroupProfile,
                     quad_tol: float = 1e-10) -> np.ndarray:
    """First-column correlations r_k, k = 0..m-1, of the Toeplitz covariance.

    r_k = gain / (2 delta) * int exp(-j 2 pi D k sin(alpha)) d alpha over the
    ring [theta - delta, theta + delta].
    """
    lo, hi = profile.interval
    k = np.arange(m)[:, None]

    def f(alpha):
        return np.exp(-2j * np.pi * spacing * k * np.sin(alpha)[None, :])

    vals = gauss_legendre_vec(f, lo, hi, tol=quad_tol * 2 * profile.delta)
    return profile.gain * vals / (2.0 * profile.delta)


def _pairwise_covariance(pos: np.ndarray, profile: GroupProfile,
                         quad_tol: float = 1e-10) -> np.ndarray:
    """Dense covariance from explicit element positions (planar arrays)."""
    m = pos.shape[0]
    iu, ju = np.triu_indices(m, k=1)
    dx = pos[iu, 0] - pos[ju, 0]
    dy = pos[iu, 1] - pos[ju, 1]
    lo, hi = profile.interval

    def f(alpha):
        # k(alpha)^T d = -2 pi (dx cos(alpha) + dy sin(alpha))
        phase = dx[:, None] * np.cos(alpha)[None, :] + dy[:, None] * np.sin(alpha)[None, :]
        return np.exp(-2j * np.pi * phase)

    vals = gauss_legendre_vec(f, lo, hi, tol=quad_tol * 2 * profile.delta)
    vals = profile.gain * vals / (2.0 * profile.delta)
    R = np.full((m, m), profile.gain, dtype=complex)
    R[iu, ju] = vals
    R[ju, iu] = np.conj(vals)
    return R


def fix_eigenvector_phases(u: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    idx = np.argmax(np.abs(u), axis=0)
    piv = u[idx, np.arange(u.shape[1])]
    phase = np.where(np.abs(piv) > 0, piv / np.abs(piv), 1.0)
    return u / phase[None, :]


def eigh_descending(r_mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition, eigenvalues descending, phases fixed."""
    lam, u = np.linalg.eigh(r_mat)
    order = np.argsort(-lam, kind="stable")
    return lam[order], fix_eigenvector_phases(u[:, order])


def effective_rank(lam: np.ndarray, rank: int,
                   trace_capture: float = TRACE_CAPTURE_DEFAULT) -> int:
    """Smallest r such that the top r eigenvalues keep >= (1 - tol) of the trace."""
    total = float(np.sum(lam[:rank]))
    csum = np.cumsum(lam[:rank])
    keep = np.searchsorted(csum, (1.0 - trace_capture) * total) + 1
    return int(min(keep, rank))


def _build_spec(R: np.ndarray, profile: GroupProfile, geom: ArrayGeometry | None,
                rank_tol: float, r_star: int | None,
                trace_capture: float) -> CovarianceSpec:
    lam, u = eigh_descending(R)
    lam = np.clip(lam, 0.0, None)
    rank = int(np.count_nonzero(lam > rank_tol * lam[0]))
    rank = max(rank, 1)
    if r_star is None:
        r_star = effective_rank(lam, rank, trace_capture)
    elif not (1 <= r_star <= rank):
        raise FeasibilityError(
            f"effective rank override {r_star} outside [1, rank={rank}]")
    return CovarianceSpec(R=R, U=u[:, :rank], lam=lam[:rank], rank=rank,
                          r_star=int(r_star), gain=profile.gain,
                          profile=profile, geometry=geom)


def one_ring_covariance(geom: ArrayGeometry, profile: GroupProfile, *,
                        quad_tol: float = 1e-10,
                        rank_tol: float = RANK_TOL_DEFAULT,
                        r_star: int | None = None,
                        trace_capture: float = TRACE_CAPTURE_DEFAULT) -> CovarianceSpec:
    """Covariance of a narrow scattering ring seen by the given array.

    The linear array exploits the Toeplitz structure (m scalar integrals);
    the circular array integrates all element pairs.  Rectangular arrays do
    not factor through a planar ring; build their covariance with
    kronecker_covariance instead.
    """
    if geom.kind == "ura":
        raise FeasibilityError(
            "rectangular arrays use kronecker_covariance on the two axis factors")
    if geom.kind == "ula":
        r0 = ula_correlations(geom.m, geom.spacing, profile, quad_tol)
        R = toeplitz(r0, np.conj(r0))
    else:
        R = _pairwise_covariance(geom.positions(), profile, quad_tol)
    return _build_spec(R, profile, geom, rank_tol, r_star, trace_capture)


def kronecker_covariance(horizontal: CovarianceSpec, vertical: CovarianceSpec, *,
                         max_dim: int = 4096,
                         trace_capture: float = TRACE_CAPTURE_DEFAULT,
                         r_star: int | None = None) -> CovarianceSpec:
    """Separable covariance R = R_h kron R_v for a rectangular array.

    The eigen-structure is assembled from the factors (products of
    eigenvalues, Kronecker products of eigenvectors) rather than recomputed,
    so it stays exact and cheap; full matrices beyond ``max_dim`` rows are
    refused to guard against accidental huge allocations.
    """
    dim = horizontal.dim * vertical.dim
    if dim > max_dim:
        raise FeasibilityError(
            f"full covariance dimension {dim} exceeds cap {max_dim}; "
            "work with the factors instead")
    R = np.kron(horizontal.R, vertical.R)
    lam = np.kron(horizontal.lam, vertical.lam)
    u = np.kron(horizontal.U, vertical.U)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    u = u[:, order]
    rank = horizontal.rank * vertical.rank
    if r_star is None:
        r_star = effective_rank(lam, rank, trace_capture)
    elif not (1 <= r_star <= rank):
        raise FeasibilityError(
            f"effective rank override {r_star} outside [1, rank={rank}]")
    gain = horizontal.gain * vertical.gain
    return CovarianceSpec(R=R, U=u, lam=lam, rank=rank, r_star=int(r_star),
                          gain=gain, profile=None, geometry=None)


@dataclass(frozen=True)
class ChannelBatch:
    """Channel realizations h = U Lambda^{1/2} w for one group.

    H has shape (draws, dim, users).  ``seed`` and ``path`` record the
    stream key so any draw can be regenerated in isolation.
    """

    H: np.ndarray
    seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    @property
    def draws(self) -> int:
        return self.H.shape[0]


def sample_channels(spec: CovarianceSpec, users: int, draws: int, seed: int,
                    path: tuple[int, ...] = ()) -> ChannelBatch:
    """Draw iid channel realizations through the covariance square root.

    Each (draw, user) pair gets its own counter stream keyed by
    (seed, *path, draw, user), so results are identical however the batch is
    split across workers.
    """
    root = np.sqrt(spec.lam)[:, None]
    H = np.empty((draws, spec.dim, users), dtype=complex)
    for d in range(draws):
        W = np.empty((spec.rank, users), dtype=complex)
        for k in range(users):
            rng = stream(seed, *path, d, k)
            W[:, k] = complex_normal(rng, spec.rank)
        H[d] = spec.U @ (root * W)
    return ChannelBatch(H=H, seed=seed, path=tuple(path))
