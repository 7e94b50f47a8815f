"""Cross-module invariant suites.

Each check builds a small fixed configuration, tests an identity the rest
of the package relies on, and reports a named pass/fail with the measured
residual.  All checks are deterministic given the seed; a failure here
points at an implementation bug, not at statistical noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import (ArrayGeometry, GroupProfile, one_ring_covariance,
                         sample_channels)
from .deteq import deteq_jgp_rzf, deteq_pgp_rzf
from .precoding import PrecodingConfig, build_precoders, exact_sinr, \
    transmit_matrix
from .prebeamforming import approximate_bd, tall_unitary_check
from .training import TrainingConfig, csit_covariances


@dataclass(frozen=True)
class CheckResult:
    """One invariant: its name, verdict, and the measured figure."""

    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _uca_specs(m=32, G=3, delta_deg=15.0, r_star=None):
    geom = ArrayGeometry(kind="uca", m=m)
    step = 2.0 * math.pi / G
    profiles = [GroupProfile(theta=-math.pi + math.radians(delta_deg) + g * step,
                             delta=math.radians(delta_deg)) for g in range(G)]
    return [one_ring_covariance(geom, p, r_star=r_star) for p in profiles]


def check_covariance_structure() -> list[CheckResult]:
    """Hermitian PSD covariances with the right trace; ULA gives Toeplitz."""
    out = []
    specs = _uca_specs()
    herm = max(np.abs(s.R - s.R.conj().T).max() for s in specs)
    out.append(CheckResult("covariance-hermitian", herm <= 1e-12,
                           f"max asymmetry {herm:.2e} (tol 1e-12)"))
    neg = min(np.linalg.eigvalsh(s.R).min() / s.lam[0] for s in specs)
    out.append(CheckResult("covariance-psd", neg >= -1e-10,
                           f"min eig / lam_max {neg:.2e} (tol -1e-10)"))
    tr = max(abs(np.trace(s.R).real - s.gain * s.dim) / (s.gain * s.dim)
             for s in specs)
    out.append(CheckResult("covariance-trace", tr <= 1e-8,
                           f"relative trace error {tr:.2e} (tol 1e-8)"))
    synth = max(np.abs(s.U @ np.diag(s.lam) @ s.U.conj().T - s.R).max()
                / s.lam[0] for s in specs)
    out.append(CheckResult("covariance-kl-synthesis", synth <= 1e-10,
                           f"U Lam U^H residual {synth:.2e} (tol 1e-10)"))
    geom = ArrayGeometry(kind="ula", m=48, spacing=0.5)
    spec = one_ring_covariance(geom, GroupProfile(theta=0.4, delta=0.2))
    R = spec.R
    dev = 0.0
    for k in range(1, R.shape[0]):
        d = np.diagonal(R, offset=k)
        dev = max(dev, np.abs(d - d[0]).max())
    out.append(CheckResult("ula-toeplitz", dev <= 1e-12,
                           f"max diagonal deviation {dev:.2e} (tol 1e-12)"))
    return out


def check_mmse_split() -> list[CheckResult]:
    """Estimate plus error covariance reassemble the effective covariance."""
    specs = _uca_specs(m=32, G=3, r_star=4)
    pb = approximate_bd(specs, r_star=4, b=6)
    tc = TrainingConfig(b_prime=6, T=24, rho_tr=10.0)
    out = []
    worst_split, worst_neg = 0.0, 0.0
    for spec, est, Bg in zip(specs, csit_covariances(specs, pb, tc),
                             pb.blocks):
        Rbar = Bg.conj().T @ spec.R @ Bg
        scale = np.trace(Rbar).real
        worst_split = max(worst_split, np.abs(
            est.Rhat_g + est.Rerr_g - Rbar).max() / scale)
        for mat in (est.Rhat_g, est.Rerr_g):
            worst_neg = min(worst_neg,
                            np.linalg.eigvalsh(mat).min() / scale)
    out.append(CheckResult("mmse-covariance-split", worst_split <= 1e-9,
                           f"Rhat + Rerr vs Rbar {worst_split:.2e} (tol 1e-9)"))
    out.append(CheckResult("mmse-psd-parts", worst_neg >= -1e-10,
                           f"min eig / trace {worst_neg:.2e} (tol -1e-10)"))
    return out


def check_power_constraint(seed=0) -> list[CheckResult]:
    """Transmit matrices carry exactly S unit-power streams after scaling."""
    specs = _uca_specs(m=32, G=3, r_star=4)
    pb = approximate_bd(specs, r_star=4, b=6)
    S_g = (3, 3, 3)
    channels = [sample_channels(spec, s, 1, seed, path=(9, g)).H[0]
                for g, (spec, s) in enumerate(zip(specs, S_g))]
    worst = 0.0
    combos = []
    for processing in ("pgp", "jgp"):
        for scheme in ("rzf", "zf"):
            cfg = PrecodingConfig(scheme=scheme, processing=processing,
                                  P=10.0, S_g=S_g)
            if processing == "jgp":
                Bstk = pb.stacked()
                heff = [Bstk.conj().T @ Hg for Hg in channels]
            else:
                heff = [Bg.conj().T @ Hg
                        for Bg, Hg in zip(pb.blocks, channels)]
            precoders, _ = build_precoders(cfg, heff, pb)
            V = transmit_matrix(pb, precoders, processing)
            err = abs(np.linalg.norm(V) ** 2 - cfg.S) / cfg.S
            worst = max(worst, err)
            combos.append(f"{processing}-{scheme}")
    # Blocks are orthonormal within themselves; approximate BD leaves the
    # cross-block products nonzero by design, so check per block.
    resid = max(tall_unitary_check(Bg)[1] for Bg in pb.blocks)
    return [CheckResult("power-trace", worst <= 1e-8,
                        f"|tr(V V^H) - S|/S {worst:.2e} over "
                        f"{', '.join(combos)} (tol 1e-8)"),
            CheckResult("prebeam-orthonormal", resid <= 1e-10,
                        f"per-block B_g^H B_g residual {resid:.2e} "
                        f"(tol 1e-10)")]


def check_rzf_zf_continuity(seed=0) -> list[CheckResult]:
    """RZF at vanishing loading reproduces the ZF precoder."""
    specs = _uca_specs(m=32, G=3, r_star=4)
    pb = approximate_bd(specs, r_star=4, b=6)
    S_g = (3, 3, 3)
    channels = [sample_channels(spec, s, 1, seed, path=(9, g)).H[0]
                for g, (spec, s) in enumerate(zip(specs, S_g))]
    heff = [Bg.conj().T @ Hg for Bg, Hg in zip(pb.blocks, channels)]
    rzf = PrecodingConfig(scheme="rzf", processing="pgp", P=10.0, S_g=S_g,
                          alpha=1e-12)
    zf = PrecodingConfig(scheme="zf", processing="pgp", P=10.0, S_g=S_g)
    V1 = transmit_matrix(pb, build_precoders(rzf, heff, pb)[0], "pgp")
    V2 = transmit_matrix(pb, build_precoders(zf, heff, pb)[0], "pgp")
    err = np.linalg.norm(V1 - V2) / np.linalg.norm(V2)
    return [CheckResult("rzf-zf-continuity", err <= 1e-6,
                        f"alpha = 1e-12 precoder gap {err:.2e} (tol 1e-6)")]


def check_single_group(seed=0) -> list[CheckResult]:
    """With one group, per-group and joint processing coincide."""
    geom = ArrayGeometry(kind="uca", m=24)
    spec = one_ring_covariance(geom, GroupProfile(theta=0.3, delta=0.25),
                               r_star=6)
    pb = approximate_bd([spec], r_star=6, b=8)
    S_g = (4,)
    H = sample_channels(spec, 4, 1, seed, path=(9, 0)).H[0]
    heff = [pb.blocks[0].conj().T @ H]
    out = []
    for scheme in ("rzf", "zf"):
        reps = []
        for processing in ("pgp", "jgp"):
            cfg = PrecodingConfig(scheme=scheme, processing=processing,
                                  P=5.0, S_g=S_g)
            precoders, zetas = build_precoders(cfg, heff, pb)
            reps.append(exact_sinr(cfg, [H], pb, precoders, zetas))
        gap = np.abs(reps[0].sinr - reps[1].sinr).max() / reps[1].sinr.max()
        out.append(CheckResult(f"pgp-jgp-single-group-{scheme}", gap <= 1e-10,
                               f"SINR gap {gap:.2e} (tol 1e-10)"))
    Rbar = [pb.blocks[0].conj().T @ spec.R @ pb.blocks[0]]
    sol_p = deteq_pgp_rzf(Rbar, pb, [spec.R], np.array([4]), 5.0)
    sol_j = deteq_jgp_rzf(Rbar, pb, np.array([4]), 5.0)
    gap = abs(sol_p.gamma_o[0] - sol_j.gamma_o[0]) / sol_j.gamma_o[0]
    out.append(CheckResult("pgp-jgp-single-group-deteq", gap <= 1e-8,
                           f"gamma gap {gap:.2e} (tol 1e-8)"))
    return out


def run_all(seed: int = 0) -> list[CheckResult]:
    """Every invariant suite in a fixed order."""
    results = []
    results += check_covariance_structure()
    results += check_mmse_split()
    results += check_power_constraint(seed)
    results += check_rzf_zf_continuity(seed)
    results += check_single_group(seed)
    return results
