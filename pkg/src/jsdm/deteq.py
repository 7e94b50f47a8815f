"""Deterministic equivalents of the RZF/ZF SINRs.

Large-system analysis replaces Monte Carlo averaging with fixed-point
systems in the per-group resolvent traces m_g.  The JGP solver couples all
groups through one b x b matrix T; the PGP solvers run one decoupled
fixed point per group and account for inter-group interference through
trace functionals of the other groups' resolvents.  The noisy-CSIT
variants run the same machinery on the estimated covariance and add the
estimation-error functional E_g.

All equation forms follow the printed fixed-point systems, with the
symmetric per-group constants (P/G, S'/b') generalized to per-group values
(P S_g/S, S_g/b_g); the symmetric case reproduces the originals exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, FeasibilityError
from .prebeamforming import PreBeamformer

# A feasible ZF group keeps m >= 1 - S_g/b_g >= 1/b_g; decay below this floor
# only happens when the fixed point collapses to zero (overloaded group).
_ZF_M_FLOOR = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-point iteration controls."""

    tol: float = 1e-9
    max_iter: int = 2000
    damping: float = 0.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not (0 <= self.damping < 1):
            raise ConfigError("damping must lie in [0, 1)")


@dataclass(frozen=True)
class DetEqSolution:
    """Converged deterministic-equivalent quantities (per group)."""

    m_o: np.ndarray
    gamma_o: np.ndarray
    zeta_sq: np.ndarray
    Gamma_o: np.ndarray
    Upsilon_o: np.ndarray
    E_o: np.ndarray
    iterations: int
    residual: float
    T: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def rates(self) -> np.ndarray:
        return np.log2(1.0 + self.gamma_o)

    def sum_se(self, S_g) -> float:
        return float(np.dot(np.asarray(S_g, float), self.rates))


def _tr_prod(a: np.ndarray, b: np.ndarray) -> float:
    # trace(a @ b) without forming the product
    return float(np.sum(a * b.T).real)


def _blocks(pb) -> list[np.ndarray]:
    if isinstance(pb, PreBeamformer):
        return list(pb.blocks)
    return list(pb)


def _check_psd_inputs(mats) -> int:
    dim = mats[0].shape[0]
    for r in mats:
        if r.shape != (dim, dim):
            raise ConfigError("covariance blocks must share one square shape")
    return dim


def solve_resolvent(Rtilde_list, loading, alpha: float,
                    cfg: SolverConfig | None = None,
                    mode: str = "rzf") -> tuple[np.ndarray, np.ndarray, int, float]:
    """Coupled resolvent fixed point m_g = (1/b) tr(Rtilde_g T).

    mode "rzf": T = (sum_g loading_g Rtilde_g/(1+m_g) + alpha I)^{-1};
    mode "zf":  T = (sum_g loading_g Rtilde_g/m_g + I)^{-1}.

    Returns (m, T, iterations, residual).  Picard iteration from m = 1 with
    the configured damping; after 200 non-contracting steps damping is
    raised to 0.5.  Negative resolvent traces abort (non-PSD input), and a
    ZF trace collapsing to zero means the group is overloaded.
    """
    cfg = cfg or SolverConfig()
    if mode not in ("rzf", "zf"):
        raise ConfigError("mode must be 'rzf' or 'zf'")
    if mode == "rzf" and alpha <= 0:
        raise ConfigError("rzf mode needs alpha > 0")
    b = _check_psd_inputs(Rtilde_list)
    load = np.asarray(loading, float)
    if load.shape != (len(Rtilde_list),) or np.any(load <= 0):
        raise ConfigError("loading needs one positive entry per block")
    eye = np.eye(b)
    m = np.ones(len(Rtilde_list))
    damping = cfg.damping
    non_contracting = 0
    prev_res = np.inf
    for it in range(1, cfg.max_iter + 1):
        if mode == "rzf":
            denom = 1.0 + m
        else:
            if np.any(m < _ZF_M_FLOOR):
                raise FeasibilityError(
                    "zero-forcing resolvent trace collapsed to zero; the group "
                    "is overloaded, reduce S_g")
            denom = m
        A = sum(ld * r / d for ld, r, d in zip(load, Rtilde_list, denom))
        T = np.linalg.inv(A + (alpha * eye if mode == "rzf" else eye))
        m_new = np.array([_tr_prod(r, T).real / b for r in Rtilde_list])
        if np.any(m_new < 0):
            raise ConvergenceError(
                "negative resolvent trace; covariance inputs are not PSD",
                residual=float(np.max(np.abs(m_new - m))), iterations=it)
        res = float(np.max(np.abs(m_new - m) / (1.0 + np.abs(m_new))))
        m = (1.0 - damping) * m_new + damping * m
        if res <= cfg.tol:
            return m, T, it, res
        if res >= prev_res:
            non_contracting += 1
            if non_contracting >= 200 and damping < 0.5:
                damping = 0.5
        prev_res = res
    raise ConvergenceError(
        f"resolvent fixed point did not converge in {cfg.max_iter} iterations",
        residual=res, iterations=cfg.max_iter)


def deteq_jgp_rzf(Rtilde_list, B, S_g, P: float, alpha: float | None = None,
                  cfg: SolverConfig | None = None) -> DetEqSolution:
    """Deterministic equivalent of the JGP-RZF SINR.

    Rtilde_list holds the b x b blocked covariances of the transformed
    channels (B^H R_g B on the stacked pre-beamformer); B may be the stacked
    matrix or the PreBeamformer itself.  Solves the coupled resolvent, then
    the G x G linear systems in n and n_g, and assembles Gamma, Upsilon and
    the per-group SINRs with zeta^2 = P / Gamma.
    """
    S_g = np.asarray(S_g, int)
    G = len(Rtilde_list)
    if S_g.shape != (G,) or np.any(S_g < 1):
        raise ConfigError("S_g needs one positive entry per group")
    if P <= 0:
        raise ConfigError("P must be positive")
    b = Rtilde_list[0].shape[0]
    S = int(S_g.sum())
    if alpha is None:
        alpha = S / (b * P)
    m, T, iters, res = solve_resolvent(Rtilde_list, S_g / b, alpha, cfg)
    stacked = B.stacked() if isinstance(B, PreBeamformer) else np.asarray(B)
    BtB = stacked.conj().T @ stacked
    A = [r @ T for r in Rtilde_list]
    C = BtB @ T
    Q = np.empty((G, G))
    for g in range(G):
        for h in range(g, G):
            Q[g, h] = Q[h, g] = _tr_prod(A[g], A[h])
    one_m2 = (1.0 + m) ** 2
    J = (S_g[None, :] / b) * Q / (b * one_m2[None, :])
    v = np.array([_tr_prod(a, C) for a in A]) / b
    IJ = np.eye(G) - J
    try:
        n = np.linalg.solve(IJ, v)
        N = np.linalg.solve(IJ, Q / b)           # N[g', g] = n_{g',g}
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            "(I - J) is singular; system too heavily loaded",
            residual=res, iterations=iters) from exc
    Gamma = float(np.sum((P * S_g / S) * n / one_m2) / b)
    zeta_sq = P / Gamma
    weights = (P * S_g / S) / one_m2             # per source group g'
    Ups = np.empty(G)
    for g in range(G):
        total = float(np.sum(weights * N[:, g])) - weights[g] * N[g, g]
        own = (P / S) * (S_g[g] - 1) * N[g, g] / one_m2[g]
        Ups[g] = (total + own) / b
    gamma = (P / S) * zeta_sq * m ** 2 / (zeta_sq * Ups + one_m2)
    return DetEqSolution(m_o=m, gamma_o=gamma,
                         zeta_sq=np.full(G, zeta_sq),
                         Gamma_o=np.full(G, Gamma), Upsilon_o=Ups,
                         E_o=np.zeros(G), iterations=iters, residual=res,
                         T=(T,))


def _pgp_group_solves(Rsolve_list, S_g, alpha, cfg, mode):
    out = []
    iters = 0
    res = 0.0
    for Rg, sg in zip(Rsolve_list, S_g):
        b_g = Rg.shape[0]
        m, T, it, r = solve_resolvent([Rg], [sg / b_g], alpha, cfg, mode=mode)
        out.append((float(m[0]), T))
        iters = max(iters, it)
        res = max(res, r)
    return out, iters, res


def deteq_pgp_rzf(Rbar_list, B, R_list, S_g, P: float,
                  alpha: float | None = None,
                  cfg: SolverConfig | None = None) -> DetEqSolution:
    """Deterministic equivalent of the PGP-RZF SINR with ideal CSIT.

    Rbar_list[g] = B_g^H R_g B_g drives group g's decoupled fixed point;
    the inter-group terms need the original R_list through the other
    groups' blocks.  Power splits as P S_g / S per group with per-stream
    power P/S.
    """
    blocks = _blocks(B)
    S_g = np.asarray(S_g, int)
    G = len(Rbar_list)
    if S_g.shape != (G,) or np.any(S_g < 1):
        raise ConfigError("S_g needs one positive entry per group")
    if P <= 0:
        raise ConfigError("P must be positive")
    S = int(S_g.sum())
    b_g = np.array([r.shape[0] for r in Rbar_list])
    if alpha is None:
        alpha = S / (int(b_g.sum()) * P)
    solves, iters, res = _pgp_group_solves(Rbar_list, S_g, alpha, cfg, "rzf")
    m = np.array([s[0] for s in solves])
    one_m2 = (1.0 + m) ** 2
    D = np.empty(G)
    n_self = np.empty(G)
    n_own = np.empty(G)
    for g, (mg, T) in enumerate(solves):
        A = Rbar_list[g] @ T
        self_tr = _tr_prod(A, A)
        D[g] = 1.0 - (S_g[g] / b_g[g]) * self_tr / (b_g[g] * one_m2[g])
        if D[g] <= 0:
            raise ConvergenceError(
                f"group {g}: interference denominator non-positive",
                residual=res, iterations=iters)
        BtB = blocks[g].conj().T @ blocks[g]
        n_self[g] = _tr_prod(A, BtB @ T) / b_g[g] / D[g]
        n_own[g] = self_tr / b_g[g] / D[g]
    Gamma = (P * S_g / S) * n_self / (b_g * one_m2)
    zeta_sq = (P * S_g / S) / Gamma
    Ups = np.zeros((G, G))
    for g in range(G):
        Ups[g, g] = (P / S) * (S_g[g] - 1) * n_own[g] / (b_g[g] * one_m2[g])
        for gp in range(G):
            if gp == g:
                continue
            _, Tp = solves[gp]
            cross = blocks[gp].conj().T @ R_list[g] @ blocks[gp]
            n_cross = _tr_prod(Rbar_list[gp] @ Tp, cross @ Tp) / b_g[gp] / D[gp]
            Ups[g, gp] = (P * S_g[gp] / S) * n_cross / (b_g[gp] * one_m2[gp])
    inter = np.array([np.dot(zeta_sq, Ups[g]) - zeta_sq[g] * Ups[g, g]
                      for g in range(G)])
    gamma = (P / S) * zeta_sq * m ** 2 / (zeta_sq * np.diag(Ups)
                                          + (1.0 + inter) * one_m2)
    return DetEqSolution(m_o=m, gamma_o=gamma, zeta_sq=zeta_sq, Gamma_o=Gamma,
                         Upsilon_o=Ups, E_o=np.zeros(G), iterations=iters,
                         residual=res, T=tuple(s[1] for s in solves))


def deteq_pgp_rzf_csit(Rbar_list, Rhat_list, B, R_list, S_g, P: float,
                       alpha: float | None = None,
                       cfg: SolverConfig | None = None) -> DetEqSolution:
    """PGP-RZF deterministic equivalent under noisy CSIT.

    The fixed points run on the estimated covariances Rhat; the error
    covariance Rbar - Rhat enters through E_g, and the intra-group term
    splits into the A_1/A_2 combination.  zeta^2 = 1/Gamma here (the power
    factors appear explicitly in the SINR assembly instead).
    """
    blocks = _blocks(B)
    S_g = np.asarray(S_g, int)
    G = len(Rbar_list)
    if S_g.shape != (G,) or np.any(S_g < 1):
        raise ConfigError("S_g needs one positive entry per group")
    if P <= 0:
        raise ConfigError("P must be positive")
    S = int(S_g.sum())
    b_g = np.array([r.shape[0] for r in Rhat_list])
    if alpha is None:
        alpha = S / (int(b_g.sum()) * P)
    solves, iters, res = _pgp_group_solves(Rhat_list, S_g, alpha, cfg, "rzf")
    m = np.array([s[0] for s in solves])
    one_m2 = (1.0 + m) ** 2
    D = np.empty(G)
    n_self = np.empty(G)
    E = np.empty(G)
    A1 = np.empty(G)
    A2 = np.empty(G)
    for g, (mg, T) in enumerate(solves):
        A = Rhat_list[g] @ T
        self_tr = _tr_prod(A, A)
        D[g] = 1.0 - (S_g[g] / b_g[g]) * self_tr / (b_g[g] * one_m2[g])
        if D[g] <= 0:
            raise ConvergenceError(
                f"group {g}: interference denominator non-positive",
                residual=res, iterations=iters)
        BtB = blocks[g].conj().T @ blocks[g]
        n_self[g] = _tr_prod(A, BtB @ T) / b_g[g] / D[g]
        err = Rbar_list[g] - Rhat_list[g]
        E[g] = _tr_prod(A, err @ T) / b_g[g] / D[g] / b_g[g]
        n_gg1 = _tr_prod(A, Rbar_list[g] @ T) / b_g[g] / D[g]
        n_gg2 = self_tr / b_g[g] / D[g]
        A1[g] = (S_g[g] - 1) * n_gg1 / (b_g[g] * one_m2[g])
        A2[g] = (S_g[g] - 1) * n_gg2 / (b_g[g] * one_m2[g])
    Gamma = n_self / (b_g * one_m2)
    zeta_sq = 1.0 / Gamma
    Ups = np.zeros((G, G))
    for g in range(G):
        Ups[g, g] = one_m2[g] * A1[g] - (2 * m[g] * (1 + m[g]) - m[g] ** 2) * A2[g]
        for gp in range(G):
            if gp == g:
                continue
            _, Tp = solves[gp]
            cross = blocks[gp].conj().T @ R_list[g] @ blocks[gp]
            n_cross = _tr_prod(Rhat_list[gp] @ Tp, cross @ Tp) / b_g[gp] / D[gp]
            Ups[g, gp] = (S_g[gp] / b_g[gp]) * n_cross / one_m2[gp]
    rho = P / S
    inter = np.array([rho * (np.dot(zeta_sq, Ups[g]) - zeta_sq[g] * Ups[g, g])
                      for g in range(G)])
    gamma = (rho * zeta_sq * m ** 2
             / (rho * zeta_sq * E + rho * zeta_sq * np.diag(Ups)
                + (1.0 + inter) * one_m2))
    return DetEqSolution(m_o=m, gamma_o=gamma, zeta_sq=zeta_sq, Gamma_o=Gamma,
                         Upsilon_o=Ups, E_o=E, iterations=iters, residual=res,
                         T=tuple(s[1] for s in solves))


def deteq_pgp_zf_csit(Rbar_list, Rhat_list, B, R_list, S_g, P: float,
                      cfg: SolverConfig | None = None) -> DetEqSolution:
    """PGP-ZF deterministic equivalent under noisy CSIT.

    ZF normalization: T_g = (S_g/b_g Rhat_g / m_g + I)^{-1} and every
    (1+m)^2 of the RZF system becomes m^2.  The intra-group term collapses
    through E/m^2 + Upsilon_gg = S_g E/m^2, which the assembly uses; the
    A_1 - A_2 form is still reported in Upsilon_o.
    """
    blocks = _blocks(B)
    S_g = np.asarray(S_g, int)
    G = len(Rbar_list)
    if S_g.shape != (G,) or np.any(S_g < 1):
        raise ConfigError("S_g needs one positive entry per group")
    if P <= 0:
        raise ConfigError("P must be positive")
    S = int(S_g.sum())
    b_g = np.array([r.shape[0] for r in Rhat_list])
    for g in range(G):
        if S_g[g] >= b_g[g]:
            raise FeasibilityError(
                f"group {g}: zero forcing needs S_g < b_g but {S_g[g]} >= {b_g[g]}")
    solves, iters, res = _pgp_group_solves(Rhat_list, S_g, 0.0, cfg, "zf")
    m = np.array([s[0] for s in solves])
    m2 = m ** 2
    D = np.empty(G)
    n_self = np.empty(G)
    E = np.empty(G)
    Ugg = np.empty(G)
    for g, (mg, T) in enumerate(solves):
        A = Rhat_list[g] @ T
        self_tr = _tr_prod(A, A)
        D[g] = 1.0 - (S_g[g] / b_g[g]) * self_tr / (b_g[g] * m2[g])
        if D[g] <= 0:
            raise ConvergenceError(
                f"group {g}: interference denominator non-positive",
                residual=res, iterations=iters)
        BtB = blocks[g].conj().T @ blocks[g]
        n_self[g] = _tr_prod(A, BtB @ T) / b_g[g] / D[g]
        err = Rbar_list[g] - Rhat_list[g]
        E[g] = _tr_prod(A, err @ T) / b_g[g] / D[g] / b_g[g]
        n_gg1 = _tr_prod(A, Rbar_list[g] @ T) / b_g[g] / D[g]
        n_gg2 = self_tr / b_g[g] / D[g]
        Ugg[g] = (S_g[g] - 1) * (n_gg1 - n_gg2) / (b_g[g] * m2[g])
    Gamma = n_self / (b_g * m2)
    zeta_sq = 1.0 / Gamma
    Ups = np.zeros((G, G))
    for g in range(G):
        Ups[g, g] = Ugg[g]
        for gp in range(G):
            if gp == g:
                continue
            _, Tp = solves[gp]
            cross = blocks[gp].conj().T @ R_list[g] @ blocks[gp]
            n_cross = _tr_prod(Rhat_list[gp] @ Tp, cross @ Tp) / b_g[gp] / D[gp]
            Ups[g, gp] = (S_g[gp] / b_g[gp]) * n_cross / m2[gp]
    rho = P / S
    inter = np.array([rho * (np.dot(zeta_sq, Ups[g]) - zeta_sq[g] * Ups[g, g])
                      for g in range(G)])
    gamma = rho * zeta_sq / (1.0 + rho * zeta_sq * S_g * E / m2 + inter)
    return DetEqSolution(m_o=m, gamma_o=gamma, zeta_sq=zeta_sq, Gamma_o=Gamma,
                         Upsilon_o=Ups, E_o=E, iterations=iters, residual=res,
                         T=tuple(s[1] for s in solves))


def deteq_pgp_zf(Rbar_list, B, R_list, S_g, P: float,
                 cfg: SolverConfig | None = None) -> DetEqSolution:
    """PGP-ZF deterministic equivalent with ideal CSIT (zero error covariance)."""
    return deteq_pgp_zf_csit(Rbar_list, Rbar_list, B, R_list, S_g, P, cfg)
