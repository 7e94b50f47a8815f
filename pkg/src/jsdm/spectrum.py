"""Spectral (Szego) analysis of linear-array covariances.

A ULA one-ring covariance is Hermitian Toeplitz, so as the array grows its
eigenvalues distribute like samples of a spectral density S(xi) on the
normalized frequencies [-1/2, 1/2), and its dominant eigenvectors approach
DFT columns whose wrapped frequencies fall inside the support of S.  The
density for a ring of half-width delta centered on theta with spacing D is

    S(xi) = 1/(2 delta) * sum_m 1 / sqrt(D^2 - (m - xi)^2),

the sum running over the integers m lying in intervals determined by where
the ring crosses the array endfire directions (+-pi/2); four interval
layouts cover all ring positions.  The support convention mirrors the ring
(xi = -D sin(alpha)) and pairs with the e^{-j 2 pi l m / M} DFT, so DFT
column m carries spectral weight S([m/M]).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .covariance import GroupProfile, ula_correlations
from .errors import FeasibilityError, SingularityWarning

_HALF_PI = 0.5 * np.pi


def wrap_frequency(m, M: int):
    """Map DFT index m to its wrapped frequency [m/M] in [-1/2, 1/2)."""
    f = np.asarray(m, dtype=float) / M
    return np.where(f >= 0.5, f - 1.0, f)


@dataclass(frozen=True)
class SpectralDensity:
    """Density S(xi) of a ULA one-ring covariance.

    ``legs`` are the z-intervals (z = D sin(alpha) over monotone pieces of
    the ring) as tuples (lo, hi, lo_open, hi_open); an integer m contributes
    to S(xi) when m - xi falls in a leg.  ``support`` lists the disjoint
    closed intervals of [-1/2, 1/2] where S > 0.
    """

    D: float
    theta: float
    delta: float
    case_id: int
    legs: tuple[tuple[float, float, bool, bool], ...]
    support: tuple[tuple[float, float], ...]

    @property
    def support_measure(self) -> float:
        return float(sum(hi - lo for lo, hi in self.support))

    def in_support(self, xi: float) -> bool:
        return any(lo <= xi <= hi for lo, hi in self.support)

    def value(self, xi: float) -> float:
        """Evaluate S(xi); +inf (with a warning) exactly on a singular point."""
        total = 0.0
        for lo, hi, lo_open, hi_open in self.legs:
            a, b = lo + xi, hi + xi
            for m in range(int(np.ceil(a)) - 1, int(np.floor(b)) + 2):
                if m < a or (lo_open and m == a):
                    continue
                if m > b or (hi_open and m == b):
                    continue
                q = self.D ** 2 - (m - xi) ** 2
                if q <= 0.0:
                    warnings.warn(
                        f"S(xi) singular at xi={xi!r} (m={m})", SingularityWarning)
                    return float("inf")
                total += 1.0 / np.sqrt(q)
        return total / (2.0 * self.delta)

    def values(self, xi: np.ndarray) -> np.ndarray:
        return np.array([self.value(x) for x in np.asarray(xi, dtype=float)])

    def samples(self, M: int) -> np.ndarray:
        """S at the M wrapped grid frequencies, nudged off singular points.

        Grid points that hit an integrable singularity (a measure-zero
        event) are replaced by the midpoint of their grid cell.
        """
        out = np.empty(M)
        for m in range(M):
            xi = float(wrap_frequency(m, M))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SingularityWarning)
                v = self.value(xi)
            if not np.isfinite(v):
                v = self.value(xi + 0.5 / M)
            out[m] = v
        return out


def _ring_legs(D: float, theta: float, delta: float):
    """Monotone z = D sin(alpha) legs of the ring and the applicable case id."""
    a, b = theta - delta, theta + delta
    sa, sb = D * np.sin(a), D * np.sin(b)
    if b < -_HALF_PI or a > _HALF_PI or (-_HALF_PI <= a and b <= _HALF_PI):
        return 1, ((min(sa, sb), max(sa, sb), False, False),)
    if a < -_HALF_PI and b > _HALF_PI:
        return 2, ((-D, sa, False, False), (-D, D, True, True), (sb, D, False, False))
    if a < -_HALF_PI:
        return 3, ((-D, sa, False, False), (-D, sb, True, False))
    return 4, ((sa, D, False, False), (sb, D, False, True))


def _support_intervals(legs, clip=(-0.5, 0.5)):
    """Union over integers m of the xi-intervals [m - hi, m - lo], merged."""
    pieces = []
    for lo, hi, _, _ in legs:
        for m in range(int(np.floor(lo + clip[0])), int(np.ceil(hi + clip[1])) + 1):
            left, right = max(m - hi, clip[0]), min(m - lo, clip[1])
            if right > left:
                pieces.append((left, right))
    pieces.sort()
    merged = []
    for left, right in pieces:
        if merged and left <= merged[-1][1] + 1e-15:
            merged[-1][1] = max(merged[-1][1], right)
        else:
            merged.append([left, right])
    return tuple((lo, hi) for lo, hi in merged)


def spectral_density(D: float, theta: float, delta: float) -> SpectralDensity:
    if not (0.0 < D <= 1.0):
        raise ValueError("spacing D must lie in (0, 1] wavelengths")
    if delta <= 0.0:
        raise ValueError("angular half-width must be positive")
    case_id, legs = _ring_legs(D, theta, delta)
    return SpectralDensity(D=D, theta=theta, delta=delta, case_id=case_id,
                           legs=legs, support=_support_intervals(legs))


def spectral_density_for(profile: GroupProfile, D: float) -> SpectralDensity:
    return spectral_density(D, profile.theta, profile.delta)


def asymptotic_rank(D: float, theta: float, delta: float) -> float:
    """Normalized covariance rank rho = lim r/M of the ULA one-ring model.

    Inside the endfire-free regime (theta +- delta within (-pi/2, pi/2))
    this is the closed form min{1, |D sin(theta-delta) - D sin(theta+delta)|};
    outside it the support measure of the general density is used (warned,
    since the closed form no longer applies).
    """
    a, b = theta - delta, theta + delta
    if -_HALF_PI < a and b < _HALF_PI:
        return min(1.0, abs(D * np.sin(a) - D * np.sin(b)))
    warnings.warn("ring crosses endfire; using general support measure",
                  stacklevel=2)
    return min(1.0, spectral_density(D, theta, delta).support_measure)


def circulant_eigenvalues(r: np.ndarray, M: int | None = None) -> np.ndarray:
    """Eigenvalues of the circulant approximant built from Toeplitz correlations.

    The first column is wrapped, c_0 = r_0 and c_m = r_m + conj(r_{M-m}),
    and its DFT gives the eigenvalues.  A residual imaginary part above
    1e-9 of the largest magnitude signals inconsistent (non-Hermitian)
    correlations and raises.
    """
    r = np.asarray(r)
    M = len(r) if M is None else M
    if len(r) < M:
        raise ValueError(f"need {M} correlations, got {len(r)}")
    c = np.empty(M, dtype=complex)
    c[0] = r[0]
    c[1:] = r[1:M] + np.conj(r[M - 1:0:-1])
    lam = np.fft.fft(c)
    scale = np.max(np.abs(lam))
    if scale > 0 and np.max(np.abs(lam.imag)) > 1e-9 * scale:
        raise ValueError("circulant eigenvalues are not real; "
                         "correlations are not Hermitian-consistent")
    return lam.real


def eigenvalue_cdf(source: str, M: int, D: float, profile: GroupProfile,
                   quad_tol: float = 1e-10) -> np.ndarray:
    """Sorted eigenvalue sample of size M for empirical-CDF comparison.

    source selects the exact Toeplitz spectrum, its circulant approximation,
    or the density samples {S([m/M])}.
    """
    if source == "sampledS":
        sd = spectral_density_for(profile, D)
        return np.sort(profile.gain * sd.samples(M))
    r = ula_correlations(M, D, profile, quad_tol)
    if source == "exact":
        return np.sort(np.linalg.eigvalsh(toeplitz(r, np.conj(r))))
    if source == "circulant":
        return np.sort(circulant_eigenvalues(r, M))
    raise ValueError(f"unknown source {source!r}")


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a, b = np.sort(a), np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def aoa_disjoint(profiles: list[GroupProfile], D: float | None = None) -> np.ndarray:
    """Pairwise disjointness of the groups' AoA intervals.

    Entry (g, g') is True iff the closed intervals [theta +- delta] do not
    intersect; touching endpoints count as overlapping, and the diagonal is
    False.  Disjoint AoA intervals imply disjoint spectral supports for any
    common spacing, hence exactly orthogonal DFT index sets.
    """
    for p in profiles:
        lo, hi = p.interval
        if lo <= -_HALF_PI or hi >= _HALF_PI:
            raise ValueError("AoA interval must stay within (-pi/2, pi/2)")
    G = len(profiles)
    out = np.zeros((G, G), dtype=bool)
    for g in range(G):
        lo_g, hi_g = profiles[g].interval
        for h in range(g + 1, G):
            lo_h, hi_h = profiles[h].interval
            disjoint = hi_g < lo_h or hi_h < lo_g
            out[g, h] = out[h, g] = disjoint
    return out


@dataclass(frozen=True)
class DftIndexSet:
    """DFT column indices whose wrapped frequency lies in a density support."""

    M: int
    indices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)


def dft_index_set(sd: SpectralDensity, M: int) -> DftIndexSet:
    freqs = wrap_frequency(np.arange(M), M)
    idx = [m for m in range(M) if sd.in_support(float(freqs[m]))]
    if not idx:
        raise FeasibilityError(
            "no DFT column falls inside the spectral support; "
            "increase the array size M")
    return DftIndexSet(M=M, indices=tuple(idx))


def dft_columns(M: int, indices) -> np.ndarray:
    """Unitary DFT columns [F]_{l,m} = exp(+j 2 pi l m / M) / sqrt(M).

    The sign is forced by the eigenvalue convention: with circulant
    eigenvalues lambda_k = sum_m c_m e^{-j 2 pi m k / M}, the eigenvector
    carrying lambda_k is the +j exponential, so column m of this matrix is
    the (approximate) covariance eigenvector of spectral weight S([m/M]).
    """
    ell = np.arange(M)[:, None]
    m = np.asarray(list(indices))[None, :]
    return np.exp(2j * np.pi * ell * m / M) / np.sqrt(M)
