"""Downlink training and MMSE estimation of effective channels.

All groups are trained in one shared phase of b' symbols: the transmitter
sends a scaled unitary waveform through every pre-beamforming block at once,
each receiver correlates with the waveform, and the resulting observation of
a user in group g is

    htilde = sqrt(rho_tr) hbar + sqrt(rho_tr) (sum_{g' != g} B_{g'}^H) h + z,

its own effective channel plus the leakage of its physical channel through
the other groups' blocks, in unit-variance complex Gaussian noise.  Linear
MMSE estimation of hbar from htilde is exact here because both are jointly
Gaussian.  Rates earned on the estimated channels pay the dimensionality
penalty max{1 - b'/T, 0} of spending b' symbols per coherence block of T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import dft

from .covariance import CovarianceSpec
from .errors import ConfigError, FeasibilityError
from .prebeamforming import PreBeamformer, bd_leakage
from .precoding import SinrReport
from .rng import complex_normal, stream

# Below this off-diagonal energy share the blocks separate the groups exactly
# and the estimator collapses to its single-block form.
BD_LEAKAGE_TOL = 1e-12
INNER_COND_LIMIT = 1e12


def default_training_power(P: float, G: int) -> float:
    """Training power when the total downlink power is split evenly over groups."""
    return P / G


@dataclass(frozen=True)
class TrainingConfig:
    """Shared training phase: length b' symbols out of a block of T.

    b_prime = 0 is bookkeeping for the ideal-CSIT case (no training phase,
    penalty 1); simulation and estimation need b_prime >= 1.
    """

    b_prime: int
    T: int
    rho_tr: float
    seed: int = 0

    def __post_init__(self):
        if self.b_prime < 0:
            raise ConfigError("training length cannot be negative")
        if self.T < 1:
            raise ConfigError("coherence block must span at least one symbol")
        if self.rho_tr < 0:
            raise ConfigError("training power cannot be negative")

    @property
    def tau(self) -> float:
        """Share of the coherence block spent on training."""
        return self.b_prime / self.T

    @property
    def penalty(self) -> float:
        return max(1.0 - self.tau, 0.0)


@dataclass(frozen=True)
class CsitEstimate:
    """MMSE estimate of one group's effective channels.

    Hhat_g stacks the estimated b' x 1 effective channels column per user.
    Rhat_g is the covariance of the estimate, Rerr_g of the estimation
    error; they split the effective covariance, Rhat_g + Rerr_g = Rbar_g.
    """

    Hhat_g: np.ndarray
    Rhat_g: np.ndarray
    Rerr_g: np.ndarray


def training_matrix(tc: TrainingConfig) -> np.ndarray:
    """Training waveform X, sqrt(rho_tr) times a unitary DFT: X X^H = rho_tr I."""
    if tc.b_prime < 1:
        raise ConfigError("no training waveform for a zero-length phase")
    return np.sqrt(tc.rho_tr) * dft(tc.b_prime, scale="sqrtn")


def _common_width(pb: PreBeamformer, tc: TrainingConfig) -> int:
    widths = set(pb.b)
    if len(widths) != 1:
        raise ConfigError(
            f"shared training requires one block width, got {sorted(widths)}")
    width = widths.pop()
    if width != tc.b_prime:
        raise ConfigError(
            f"training length {tc.b_prime} must match the block width {width}")
    return width


def simulate_training(channels: list[np.ndarray], pb: PreBeamformer,
                      tc: TrainingConfig,
                      path: tuple[int, ...] = ()) -> list[np.ndarray]:
    """Correlated training observations, one b'-vector per user.

    channels[g] is the true M x S_g channel of group g; the returned list
    holds the matching b' x S_g observation matrices.  Only the waveform
    Gram X X^H = rho_tr I enters after correlation, so the observation is
    formed directly as sqrt(rho_tr) (sum_g' B_g')^H h plus unit-variance
    noise.  Deterministic given tc.seed (noise stream keyed per group,
    prefixed by ``path`` so callers can separate draws or blocks).
    """
    _common_width(pb, tc)
    if len(channels) != pb.groups:
        raise ConfigError("one channel matrix per group is required")
    b_sum = np.sum(pb.blocks, axis=0)
    root = np.sqrt(tc.rho_tr)
    obs = []
    for g, H_g in enumerate(channels):
        noise = complex_normal(stream(tc.seed, *path, g), tc.b_prime,
                               H_g.shape[1])
        obs.append(root * (b_sum.conj().T @ H_g) + noise)
    return obs


def _estimate_general(obs_g, R_g, B_g, b_sum, rho):
    # MMSE through every block: the observation mixes the user's covariance
    # through the summed blocks, A = B_g^H R_g Bsum, Q = Bsum^H R_g Bsum.
    A = B_g.conj().T @ R_g @ b_sum
    Q = b_sum.conj().T @ R_g @ b_sum
    inner = rho * Q + np.eye(Q.shape[0])
    cond = np.linalg.cond(inner)
    if cond > INNER_COND_LIMIT:
        raise FeasibilityError(
            f"training estimator matrix is ill-conditioned (cond {cond:.2e})")
    Hhat = np.sqrt(rho) * (A @ np.linalg.solve(inner, obs_g))
    Rhat = rho * (A @ np.linalg.solve(inner, A.conj().T))
    return Hhat, 0.5 * (Rhat + Rhat.conj().T)


def _estimate_reduced(obs_g, R_g, B_g, rho):
    # Exact separation: the leakage term vanishes and only the group's own
    # effective covariance enters.
    Rbar = B_g.conj().T @ R_g @ B_g
    inner = rho * Rbar + np.eye(Rbar.shape[0])
    cond = np.linalg.cond(inner)
    if cond > INNER_COND_LIMIT:
        raise FeasibilityError(
            f"training estimator matrix is ill-conditioned (cond {cond:.2e})")
    Hhat = np.sqrt(rho) * (Rbar @ np.linalg.solve(inner, obs_g))
    Rhat = rho * (Rbar @ np.linalg.solve(inner, Rbar))
    return Hhat, 0.5 * (Rhat + Rhat.conj().T)


def mmse_estimate(obs: list[np.ndarray], specs: list[CovarianceSpec],
                  pb: PreBeamformer, tc: TrainingConfig, *,
                  method: str = "auto") -> list[CsitEstimate]:
    """MMSE effective-channel estimates and their covariance split per group.

    obs comes from :func:`simulate_training`; specs[g].R supplies the
    physical covariance of group g's users.  method "auto" uses the
    single-block estimator for groups whose blocks separate them exactly
    (off-diagonal energy share below ``BD_LEAKAGE_TOL``) and the full
    multi-block form otherwise; "general" and "reduced" force one path.
    """
    if method not in ("auto", "general", "reduced"):
        raise ConfigError(f"unknown estimation method {method!r}")
    _common_width(pb, tc)
    if not (len(obs) == len(specs) == pb.groups):
        raise ConfigError("obs, specs and pre-beamformer must agree on groups")
    b_sum = np.sum(pb.blocks, axis=0)
    leak = bd_leakage(pb, specs)
    off_share = leak.sum(axis=1) - np.diag(leak)
    out = []
    for g, (obs_g, spec) in enumerate(zip(obs, specs)):
        B_g = pb.blocks[g]
        if spec.dim != B_g.shape[0]:
            raise ConfigError("covariance and pre-beamformer dimensions differ")
        reduced = method == "reduced" or (
            method == "auto" and off_share[g] < BD_LEAKAGE_TOL)
        if reduced:
            Hhat, Rhat = _estimate_reduced(obs_g, spec.R, B_g, tc.rho_tr)
        else:
            Hhat, Rhat = _estimate_general(obs_g, spec.R, B_g, b_sum, tc.rho_tr)
        Rbar = B_g.conj().T @ spec.R @ B_g
        Rbar = 0.5 * (Rbar + Rbar.conj().T)
        out.append(CsitEstimate(Hhat_g=Hhat, Rhat_g=Rhat, Rerr_g=Rbar - Rhat))
    return out


def csit_covariances(specs: list[CovarianceSpec], pb: PreBeamformer,
                     tc: TrainingConfig, *,
                     method: str = "auto") -> list[CsitEstimate]:
    """Estimate/error covariance split without simulating any observation.

    Rhat and Rerr depend only on the training power and the geometry, so
    deterministic-equivalent sweeps over the training length can use this
    directly; the returned estimates carry empty Hhat matrices.
    """
    empty = [np.zeros((tc.b_prime, 0), dtype=complex) for _ in specs]
    return mmse_estimate(empty, specs, pb, tc, method=method)


def net_rate(report: SinrReport, tc: TrainingConfig) -> np.ndarray:
    """Per-user rates scaled by the training penalty max{1 - b'/T, 0}."""
    return tc.penalty * report.rate
