"""First-stage pre-beamforming designs.

The pre-beamformer reduces an M-antenna array to b = sum_g b_g effective
dimensions through per-group blocks B_g with orthonormal columns, chosen
from second-order statistics only.  Three designs are provided: plain
eigen-beamforming (B_g = U_g), approximate block diagonalization (zero-force
the other groups' dominant eigenmodes, then eigen-beamform in the surviving
subspace), and DFT column selection for large linear arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .covariance import (CovarianceSpec, GroupProfile, eigh_descending,
                         fix_eigenvector_phases)
from .errors import FeasibilityError
from .spectrum import aoa_disjoint, dft_columns, dft_index_set, spectral_density_for


@dataclass(frozen=True)
class PreBeamformer:
    """Per-group pre-beamforming blocks plus design metadata."""

    blocks: tuple[np.ndarray, ...]
    method: str
    r_star_used: tuple[int, ...] = ()

    @property
    def groups(self) -> int:
        return len(self.blocks)

    @property
    def b(self) -> tuple[int, ...]:
        return tuple(blk.shape[1] for blk in self.blocks)

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.blocks, axis=1)


def eigen_beamforming(specs: list[CovarianceSpec]) -> PreBeamformer:
    """B_g = U_g: use every group's full covariance eigenbasis."""
    m = specs[0].dim
    total = sum(s.rank for s in specs)
    if total > m:
        raise FeasibilityError(
            f"eigen-beamforming needs sum of ranks <= M but {total} > {m}")
    return PreBeamformer(blocks=tuple(s.U.copy() for s in specs),
                         method="eigen",
                         r_star_used=tuple(s.rank for s in specs))


def identity_prebeamforming(m: int) -> PreBeamformer:
    """Single identity block: no dimensionality reduction (full-CSIT baseline)."""
    return PreBeamformer(blocks=(np.eye(m, dtype=complex),), method="identity",
                         r_star_used=(m,))


def _null_space_basis(xi: np.ndarray, m: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of xi."""
    u, sv, _ = np.linalg.svd(xi, full_matrices=True)
    ns_rank = int(np.count_nonzero(sv > 1e-10 * sv[0])) if sv.size else 0
    if ns_rank >= m:
        raise FeasibilityError(
            "other groups' retained eigenmodes span the whole space; "
            "no room left for this group")
    return u[:, ns_rank:]


def _per_group(value, G: int) -> list[int] | None:
    if value is None:
        return None
    if np.isscalar(value):
        return [int(value)] * G
    return [int(v) for v in value]


def approximate_bd(specs: list[CovarianceSpec],
                   r_star: int | list[int] | None = None,
                   b: int | list[int] | None = None) -> PreBeamformer:
    """Approximate block diagonalization.

    For each group, the other groups' r*-dominant eigenmodes are stacked
    into Xi_g and B_g is built as E_g^(0) G_g^(1): an orthonormal basis
    E_g^(0) of the complement of Span(Xi_g) followed by the b_g dominant
    eigenvectors of the projected covariance E_g^(0)H R_g E_g^(0).  With
    r* = r and sum r_g <= M this reduces to exact block diagonalization.
    """
    G = len(specs)
    m = specs[0].dim
    r_star = [s.r_star for s in specs] if r_star is None else _per_group(r_star, G)
    for g, (s, rs) in enumerate(zip(specs, r_star)):
        if not (1 <= rs <= s.rank):
            raise FeasibilityError(
                f"group {g}: r_star={rs} outside [1, rank={s.rank}]")
    b = list(r_star) if b is None else _per_group(b, G)
    blocks = []
    for g in range(G):
        others = sum(r_star) - r_star[g]
        headroom = m - others
        cap = min(specs[g].rank, headroom)
        if not (1 <= b[g] <= cap):
            raise FeasibilityError(
                f"group {g}: b={b[g]} violates 1 <= b <= min(r_g={specs[g].rank}, "
                f"M - sum r*_other = {headroom})")
        xi = np.concatenate([specs[h].dominant(r_star[h])
                             for h in range(G) if h != g], axis=1) \
            if G > 1 else np.zeros((m, 0))
        e0 = _null_space_basis(xi, m)
        r_hat = e0.conj().T @ specs[g].R @ e0
        lam, gvec = eigh_descending(r_hat)
        n_pos = int(np.count_nonzero(lam > 1e-10 * max(lam[0], 0)))
        if n_pos < b[g]:
            raise FeasibilityError(
                f"group {g}: projected covariance rank {n_pos} below requested "
                f"b={b[g]}")
        blocks.append(fix_eigenvector_phases(e0 @ gvec[:, :b[g]]))
    return PreBeamformer(blocks=tuple(blocks), method="approx_bd",
                         r_star_used=tuple(r_star))


def dft_prebeamforming(profiles: list[GroupProfile], D: float, M: int,
                       b: int | list[int] | None = None) -> PreBeamformer:
    """DFT column selection: B_g spans the columns indexed by group g's support.

    Disjoint AoA intervals give exactly orthogonal blocks.  When a per-group
    cap b_g is supplied, the b_g columns with the largest sampled density
    values are kept.
    """
    b = _per_group(b, len(profiles))
    try:
        disjoint = aoa_disjoint(profiles)
        if not np.all(disjoint[~np.eye(len(profiles), dtype=bool)]):
            warnings.warn("AoA intervals overlap; DFT blocks may collide",
                          stacklevel=2)
    except ValueError:
        warnings.warn("AoA intervals reach endfire; disjointness not checked",
                      stacklevel=2)
    index_sets = []
    for g, prof in enumerate(profiles):
        sd = spectral_density_for(prof, D)
        idx = list(dft_index_set(sd, M).indices)
        if b is not None and b[g] < len(idx):
            s_vals = sd.samples(M)[idx]
            order = np.argsort(-s_vals, kind="stable")[:b[g]]
            idx = sorted(np.asarray(idx)[order].tolist())
        index_sets.append(idx)
    seen: dict[int, int] = {}
    collisions = []
    for g, idx in enumerate(index_sets):
        for i in idx:
            if i in seen:
                collisions.append((i, seen[i], g))
            else:
                seen[i] = g
    if collisions:
        listing = ", ".join(f"column {i} (groups {a} and {bb})"
                            for i, a, bb in collisions[:8])
        raise FeasibilityError(f"DFT index sets collide: {listing}")
    blocks = tuple(dft_columns(M, idx) for idx in index_sets)
    return PreBeamformer(blocks=blocks, method="dft",
                         r_star_used=tuple(len(i) for i in index_sets))


def tall_unitary_check(pb: PreBeamformer | np.ndarray) -> tuple[bool, float]:
    """Check the stacked blocks for (approximate) tall-unitarity.

    Returns (is_tall_unitary, max deviation of stacked^H stacked from I);
    true iff the deviation is at most 1e-8.
    """
    stacked = pb.stacked() if isinstance(pb, PreBeamformer) else pb
    gram = stacked.conj().T @ stacked
    dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    return dev <= 1e-8, dev


def bd_leakage(pb: PreBeamformer, specs: list[CovarianceSpec]) -> np.ndarray:
    """Power fraction of group g's covariance landing in block g'.

    Entry (g, g') = tr(B_{g'}^H R_g B_{g'}) / tr(R_g): the expected share of
    group g's channel energy seen through group g's own (diagonal) or
    another group's (off-diagonal) pre-beamformer.
    """
    G = len(specs)
    out = np.empty((G, G))
    for g, s in enumerate(specs):
        tr_g = float(np.trace(s.R).real)
        for h, blk in enumerate(pb.blocks):
            out[g, h] = float(np.trace(blk.conj().T @ s.R @ blk).real) / tr_g
    return out
