"""Second-stage linear precoders and exact SINR evaluation.

On top of a fixed pre-beamformer B the transmitter applies a regularized
zero-forcing or zero-forcing precoder to the effective channel Hbar = B^H H.
Joint group processing (JGP) forms one precoder over the stacked effective
channel of all groups; per-group processing (PGP) forms independent per-group
precoders and pays for the residual inter-group interference.  Every stream
carries power P/S, with S the total number of simultaneously served streams,
so the sum over groups of the transmit covariance traces equals P.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FeasibilityError
from .prebeamforming import PreBeamformer

_SCHEMES = ("rzf", "zf")
_PROCESSING = ("jgp", "pgp", "full_csit")


def default_alpha(S: int, b: int, P: float) -> float:
    """Regularization alpha = S/(bP) used throughout."""
    return S / (b * P)


@dataclass(frozen=True)
class PrecodingConfig:
    """Scheme/processing selection plus the power and loading parameters."""

    scheme: str
    processing: str
    P: float
    S_g: tuple[int, ...]
    alpha: float | None = None

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"scheme must be one of {_SCHEMES}")
        if self.processing not in _PROCESSING:
            raise ConfigError(f"processing must be one of {_PROCESSING}")
        if self.P <= 0:
            raise ConfigError("P must be positive")
        object.__setattr__(self, "S_g", tuple(int(s) for s in self.S_g))
        if any(s < 1 for s in self.S_g):
            raise ConfigError("every S_g must be >= 1")
        if self.scheme == "rzf" and self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive for RZF")

    @property
    def S(self) -> int:
        return sum(self.S_g)

    def alpha_for(self, b: int) -> float:
        if self.scheme == "zf":
            return 0.0
        return default_alpha(self.S, b, self.P) if self.alpha is None else self.alpha


@dataclass(frozen=True)
class SinrReport:
    """Per-user SINRs and rates for one precoding evaluation."""

    sinr: np.ndarray
    zeta: tuple[float, ...]
    group_of_user: tuple[int, ...] = field(default=())

    @property
    def rate(self) -> np.ndarray:
        return np.log2(1.0 + self.sinr)

    @property
    def sum_se(self) -> float:
        return float(np.sum(self.rate))


def _regularized_inverse_times(Heff: np.ndarray, eps: float) -> np.ndarray:
    # [Heff Heff^H + eps I]^{-1} Heff computed as Heff [Heff^H Heff + eps I]^{-1}
    # (push-through identity): the S x S gram keeps its conditioning as
    # eps -> 0 on full-column-rank channels, the b x b form does not.
    b, S = Heff.shape
    if S <= b:
        gram = Heff.conj().T @ Heff + eps * np.eye(S)
        return Heff @ np.linalg.inv(gram)
    K = np.linalg.inv(Heff @ Heff.conj().T + eps * np.eye(b))
    return K @ Heff


def _normalized(W: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, float]:
    # zeta^2 = S_blk / tr(W^H B^H B W); with per-stream power P/S the block
    # then radiates exactly (P/S) * S_blk.
    BW = B @ W
    denom = float(np.real(np.vdot(BW, BW)))
    if denom <= 0:
        raise FeasibilityError("precoder radiates no power; channel is zero")
    zeta = float(np.sqrt(W.shape[1] / denom))
    return zeta * W, zeta


def rzf_precoder_jgp(Heff: np.ndarray, alpha: float,
                     pb: PreBeamformer) -> tuple[np.ndarray, float]:
    """Joint RZF on the stacked effective channel.

    Heff is b x S (columns are user channels through B).  Returns
    (zeta * K Heff, zeta) with K = [Heff Heff^H + b alpha I]^{-1} and
    zeta^2 = S / tr(P^H B^H B P), so that per-stream power P/S radiates
    exactly P in total; the power level itself cancels out of zeta.
    """
    b, S = Heff.shape
    if S < 1:
        raise ConfigError("need at least one stream")
    if alpha <= 0:
        raise ConfigError("JGP RZF needs alpha > 0")
    return _normalized(_regularized_inverse_times(Heff, b * alpha), pb.stacked())


def rzf_precoder_pgp(Heff_g: np.ndarray, alpha: float,
                     B_g: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-group RZF block: K_g = [Heff_g Heff_g^H + b_g alpha I]^{-1}.

    Normalization gives the group S_g/S of the total power once streams
    carry P/S each.
    """
    b_g, S_g = Heff_g.shape
    if S_g < 1:
        raise ConfigError("need at least one stream")
    if alpha <= 0:
        raise ConfigError("PGP RZF needs alpha > 0")
    return _normalized(_regularized_inverse_times(Heff_g, b_g * alpha), B_g)


def zf_precoder(Heff: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, float]:
    """Zero forcing: zeta * Heff (Heff^H Heff)^{-1}, pseudo-inverse form."""
    b, S = Heff.shape
    if S < 1:
        raise ConfigError("need at least one stream")
    if S > b:
        raise FeasibilityError(f"ZF needs S <= b but S={S} > b={b}")
    gram = Heff.conj().T @ Heff
    if np.linalg.cond(gram) > 1e10:
        raise FeasibilityError(
            "effective channel is rank deficient; reduce the stream count")
    return _normalized(Heff @ np.linalg.inv(gram), B)


def build_precoders(cfg: PrecodingConfig, Heff_blocks: list[np.ndarray],
                    pb: PreBeamformer) -> tuple[list[np.ndarray], tuple[float, ...]]:
    """Construct the per-group (PGP) or single stacked (JGP) precoder blocks.

    Heff_blocks holds the per-group effective channels B_g^H H_g; for JGP
    they are rows of one stacked b x S channel so the list must contain the
    full-height blocks B^H H_g instead (b x S_g each).
    """
    if cfg.processing == "pgp":
        out, zetas = [], []
        for Hg, Bg in zip(Heff_blocks, pb.blocks):
            if cfg.scheme == "rzf":
                Pg, z = rzf_precoder_pgp(Hg, cfg.alpha_for(Hg.shape[0]), Bg)
            else:
                Pg, z = zf_precoder(Hg, Bg)
            out.append(Pg)
            zetas.append(z)
        return out, tuple(zetas)
    Heff = np.concatenate(Heff_blocks, axis=1)
    if cfg.scheme == "rzf":
        Pmat, z = rzf_precoder_jgp(Heff, cfg.alpha_for(Heff.shape[0]), pb)
    else:
        Pmat, z = zf_precoder(Heff, pb.stacked())
    return [Pmat], (z,)


def transmit_matrix(pb: PreBeamformer, precoders: list[np.ndarray],
                    processing: str) -> np.ndarray:
    """M x S matrix V = B P; PGP stacks the per-group products column-wise."""
    if processing == "pgp":
        return np.concatenate([Bg @ Pg for Bg, Pg in zip(pb.blocks, precoders)],
                              axis=1)
    return pb.stacked() @ precoders[0]


def exact_sinr(cfg: PrecodingConfig, channels: list[np.ndarray],
               pb: PreBeamformer, precoders: list[np.ndarray],
               zetas: tuple[float, ...] = (),
               signal_estimates: list[np.ndarray] | None = None) -> SinrReport:
    """Exact per-user SINR of one channel realization.

    channels[g] is the true M x S_g channel of group g.  With per-stream
    power P/S, user k of group g sees

        gamma = (P/S)|s_k|^2 / ((P/S)(sum_{j != k}|h_k^H v_j|^2 + self) + 1)

    where v_j are columns of V = B P.  Under perfect CSIT the useful
    coefficient is s_k = h_k^H v_k and self = 0.  When signal_estimates
    provides the estimated effective channels hat(h)bar_k (b_g x S_g per
    group), the receiver only relies on the estimated coefficient
    s_k = hat(h)bar_k^H p_k, and the mismatch |h_k^H v_k - s_k|^2 counts
    as self interference.
    """
    V = transmit_matrix(pb, precoders, cfg.processing)
    H = np.concatenate(channels, axis=1)
    S = H.shape[1]
    if S != sum(cfg.S_g) or V.shape[1] != S:
        raise ConfigError("stream count mismatch between channels and precoders")
    rho = cfg.P / S
    cross = H.conj().T @ V                       # (k, j) -> h_k^H v_j
    coef = np.diag(cross).copy()
    if signal_estimates is not None:
        if cfg.processing != "pgp":
            raise ConfigError("estimated-coefficient mode applies to PGP only")
        est = []
        for Hg_hat, Pg in zip(signal_estimates, precoders):
            est.append(np.sum(Hg_hat.conj() * Pg, axis=0))
        coef = np.concatenate(est)
    signal = rho * np.abs(coef) ** 2
    total = rho * np.sum(np.abs(cross) ** 2, axis=1)
    self_term = rho * np.abs(np.diag(cross)) ** 2
    interference = total - self_term + rho * np.abs(np.diag(cross) - coef) ** 2
    sinr = signal / (interference + 1.0)
    groups = tuple(g for g, s in enumerate(cfg.S_g) for _ in range(s))
    return SinrReport(sinr=sinr, zeta=tuple(zetas), group_of_user=groups)
