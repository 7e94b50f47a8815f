"""Scenario runner: config files, result tables, design sweeps.

A scenario file is a YAML mapping that fixes the array, the user groups,
the two-stage transmitter and the evaluation grid.  Angles are given in
degrees in configs and converted to radians internally.  Parsing fills
defaults and canonicalizes values, so parse -> serialize -> parse is the
identity and the scenario id (a content hash) is stable.

``run_scenario`` evaluates the deterministic equivalents over the SNR grid,
optionally next to Monte Carlo averages, and writes one CSV row per
(method, SNR, user-or-aggregate, metric).  All randomness is counter-keyed
by (seed, path), so the output bytes depend only on the config and seed,
never on threading or batching.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ._version import __version__
from .covariance import (ArrayGeometry, CovarianceSpec, GroupProfile,
                         one_ring_covariance, sample_channels)
from .deteq import (DetEqSolution, deteq_jgp_rzf, deteq_pgp_rzf,
                    deteq_pgp_rzf_csit, deteq_pgp_zf, deteq_pgp_zf_csit)
from .errors import ConfigError, ConvergenceError, FeasibilityError
from .prebeamforming import (PreBeamformer, approximate_bd,
                             dft_prebeamforming, eigen_beamforming,
                             identity_prebeamforming)
from .precoding import PrecodingConfig, build_precoders, exact_sinr
from .training import TrainingConfig, csit_covariances, mmse_estimate, \
    simulate_training

RESULT_SCHEMA = "1"
RESULT_COLUMNS = ("schema_version", "scenario_id", "method", "snr_db",
                  "group", "user", "metric", "value")
MANIFEST_FORMAT = "jsdm-run-manifest-1"

_GEOMETRY_KINDS = ("ula", "uca")
_PREBEAM_METHODS = ("approx_bd", "dft", "eigen", "identity")

# Stream-key prefixes: channel draws and training noise must never collide.
_PATH_CHANNELS = 1
_PATH_TRAINING = 2


def _fail(problems: list[str]):
    if problems:
        raise ConfigError("invalid scenario: " + "; ".join(problems))


def _num(section, key, problems, *, default=None, required=False,
         minimum=None, integer=False, allow_none=False):
    """Pull one numeric field out of a config section, collecting problems."""
    if key not in section or section[key] is None:
        if required:
            problems.append(f"{key} is required")
            return default
        return default if not allow_none else None
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{key} must be a number, got {v!r}")
        return default
    if integer:
        if float(v) != int(v):
            problems.append(f"{key} must be an integer, got {v!r}")
            return default
        v = int(v)
    else:
        v = float(v)
    if minimum is not None and v < minimum:
        problems.append(f"{key} must be >= {minimum}, got {v!r}")
        return default
    return v


def _check_keys(section, allowed, where, problems):
    extra = sorted(set(section) - set(allowed))
    if extra:
        problems.append(f"unknown keys in {where}: {', '.join(extra)}")


def _normalize(raw: dict) -> dict:
    """Apply defaults, coerce types and validate the cross-field rules."""
    if not isinstance(raw, dict):
        raise ConfigError("scenario config must be a mapping")
    problems: list[str] = []
    _check_keys(raw, ("name", "seed", "geometry", "groups", "prebeamforming",
                      "precoding", "training", "snr_grid_db", "mc_draws",
                      "out"), "scenario", problems)
    data: dict = {}
    data["name"] = str(raw.get("name", "scenario"))
    data["seed"] = _num(raw, "seed", problems, default=0, minimum=0,
                        integer=True)

    geo = raw.get("geometry")
    if not isinstance(geo, dict):
        problems.append("geometry section is required")
        geo = {}
    _check_keys(geo, ("kind", "m", "spacing"), "geometry", problems)
    kind = str(geo.get("kind", "")).lower()
    if kind not in _GEOMETRY_KINDS:
        problems.append(f"geometry.kind must be one of {_GEOMETRY_KINDS}")
        kind = "ula"
    m = _num(geo, "m", problems, required=True, default=2, minimum=2,
             integer=True)
    spacing = _num(geo, "spacing", problems, default=0.5, minimum=1e-6)
    data["geometry"] = {"kind": kind, "m": m, "spacing": spacing}

    groups = raw.get("groups")
    if not isinstance(groups, list) or not groups:
        problems.append("groups must be a non-empty list")
        groups = []
    glist = []
    for i, grp in enumerate(groups):
        if not isinstance(grp, dict):
            problems.append(f"groups[{i}] must be a mapping")
            continue
        _check_keys(grp, ("theta_deg", "delta_deg", "gain"),
                    f"groups[{i}]", problems)
        glist.append({
            "theta_deg": _num(grp, "theta_deg", problems, required=True,
                              default=0.0),
            "delta_deg": _num(grp, "delta_deg", problems, required=True,
                              default=1.0, minimum=1e-6),
            "gain": _num(grp, "gain", problems, default=1.0, minimum=1e-12),
        })
    data["groups"] = glist
    G = len(glist)

    pbm = raw.get("prebeamforming")
    if not isinstance(pbm, dict):
        problems.append("prebeamforming section is required")
        pbm = {}
    _check_keys(pbm, ("method", "r_star", "b"), "prebeamforming", problems)
    method = str(pbm.get("method", "")).lower()
    if method not in _PREBEAM_METHODS:
        problems.append(f"prebeamforming.method must be one of "
                        f"{_PREBEAM_METHODS}")
        method = "identity"
    r_star = _num(pbm, "r_star", problems, minimum=1, integer=True,
                  allow_none=True)
    b = _num(pbm, "b", problems, minimum=1, integer=True, allow_none=True)
    if method == "dft" and kind != "ula":
        problems.append("dft pre-beamforming needs a ula geometry")
    if method == "identity" and (r_star is not None or b is not None):
        problems.append("identity pre-beamforming takes no r_star or b")
    data["prebeamforming"] = {"method": method, "r_star": r_star, "b": b}

    prc = raw.get("precoding")
    if not isinstance(prc, dict):
        prc = {}
    _check_keys(prc, ("scheme", "processing", "streams", "alpha"),
                "precoding", problems)
    scheme = str(prc.get("scheme", "rzf")).lower()
    processing = str(prc.get("processing", "pgp")).lower()
    if scheme not in ("rzf", "zf"):
        problems.append("precoding.scheme must be rzf or zf")
        scheme = "rzf"
    if processing not in ("pgp", "jgp"):
        problems.append("precoding.processing must be pgp or jgp")
        processing = "pgp"
    streams = prc.get("streams", 1)
    if isinstance(streams, (int, float)) and not isinstance(streams, bool):
        streams = [streams] * max(G, 1)
    if not isinstance(streams, list) or (G and len(streams) != G):
        problems.append("precoding.streams must be a scalar or one entry "
                        "per group")
        streams = [1] * max(G, 1)
    slist = []
    for s in streams:
        if isinstance(s, bool) or not isinstance(s, (int, float)) \
                or float(s) != int(s) or int(s) < 1:
            problems.append(f"stream counts must be positive integers, "
                            f"got {s!r}")
            slist.append(1)
        else:
            slist.append(int(s))
    alpha = _num(prc, "alpha", problems, minimum=1e-300, allow_none=True)
    data["precoding"] = {"scheme": scheme, "processing": processing,
                         "streams": slist, "alpha": alpha}

    trn = raw.get("training")
    if trn is None:
        data["training"] = None
    elif not isinstance(trn, dict):
        problems.append("training must be a mapping or omitted")
        data["training"] = None
    else:
        _check_keys(trn, ("b_prime", "T", "rho_tr"), "training", problems)
        data["training"] = {
            "b_prime": _num(trn, "b_prime", problems, required=True,
                            default=1, minimum=1, integer=True),
            "T": _num(trn, "T", problems, required=True, default=1,
                      minimum=1, integer=True),
            "rho_tr": _num(trn, "rho_tr", problems, minimum=1e-300,
                           allow_none=True),
        }

    snr = raw.get("snr_grid_db")
    if not isinstance(snr, list) or not snr:
        problems.append("snr_grid_db must be a non-empty list")
        snr = [10.0]
    sgrid = []
    for v in snr:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            problems.append(f"snr_grid_db entries must be numbers, got {v!r}")
        else:
            sgrid.append(float(v))
    data["snr_grid_db"] = sgrid or [10.0]
    data["mc_draws"] = _num(raw, "mc_draws", problems, default=0, minimum=0,
                            integer=True)
    data["out"] = str(raw.get("out", "results.csv"))

    # Cross-field rules that need no linear algebra.
    if data["training"] is not None:
        if processing != "pgp":
            problems.append("training applies to per-group processing only")
        bp = data["training"]["b_prime"]
        width = {"approx_bd": b if b is not None else r_star,
                 "dft": b, "identity": m, "eigen": None}[method]
        if width is not None and width != bp:
            problems.append(f"training length {bp} must match the "
                            f"pre-beamformer width {width}")
        if scheme == "zf" and any(s >= bp for s in slist):
            problems.append("zero forcing under training needs streams "
                            "strictly below b_prime in every group")
    if processing == "jgp" and scheme == "zf" and data["mc_draws"] == 0:
        problems.append("jgp-zf has no deterministic equivalent here; set "
                        "mc_draws > 0 or use pgp/rzf")
    _fail(problems)
    return data


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario config plus builders for the pipeline objects."""

    data: dict

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def snr_grid_db(self) -> tuple[float, ...]:
        return tuple(self.data["snr_grid_db"])

    @property
    def mc_draws(self) -> int:
        return self.data["mc_draws"]

    @property
    def out(self) -> str:
        return self.data["out"]

    @property
    def streams(self) -> tuple[int, ...]:
        return tuple(self.data["precoding"]["streams"])

    @property
    def scheme(self) -> str:
        return self.data["precoding"]["scheme"]

    @property
    def processing(self) -> str:
        return self.data["precoding"]["processing"]

    @property
    def has_training(self) -> bool:
        return self.data["training"] is not None

    def scenario_id(self) -> str:
        digest = hashlib.sha256(serialize_scenario(self).encode("utf-8"))
        return digest.hexdigest()[:12]

    def method_tag(self) -> str:
        tag = f"{self.processing}-{self.scheme}"
        return tag + "-csit" if self.has_training else tag

    def geometry(self) -> ArrayGeometry:
        geo = self.data["geometry"]
        return ArrayGeometry(kind=geo["kind"], m=geo["m"],
                             spacing=geo["spacing"])

    def profiles(self) -> list[GroupProfile]:
        return [GroupProfile(theta=math.radians(g["theta_deg"]),
                             delta=math.radians(g["delta_deg"]),
                             gain=g["gain"])
                for g in self.data["groups"]]

    def covariance_specs(self, quad_tol: float = 1e-10) \
            -> list[CovarianceSpec]:
        geom = self.geometry()
        r_star = self.data["prebeamforming"]["r_star"]
        return [one_ring_covariance(geom, prof, quad_tol=quad_tol,
                                    r_star=r_star)
                for prof in self.profiles()]

    def prebeamformer(self, specs: list[CovarianceSpec],
                      b: int | None = None) -> PreBeamformer:
        """Build the configured pre-beamformer; b overrides the width."""
        pbm = self.data["prebeamforming"]
        method = pbm["method"]
        if method == "approx_bd":
            return approximate_bd(specs, r_star=pbm["r_star"],
                                  b=b if b is not None else pbm["b"])
        if method == "dft":
            geo = self.data["geometry"]
            return dft_prebeamforming(self.profiles(), geo["spacing"],
                                      geo["m"],
                                      b=b if b is not None else pbm["b"])
        if b is not None:
            raise ConfigError(f"{method} pre-beamforming has no "
                              "adjustable width")
        if method == "eigen":
            return eigen_beamforming(specs)
        return identity_prebeamforming(self.data["geometry"]["m"])

    def precoding_config(self, P: float) -> PrecodingConfig:
        prc = self.data["precoding"]
        return PrecodingConfig(scheme=prc["scheme"],
                               processing=prc["processing"], P=P,
                               S_g=tuple(prc["streams"]),
                               alpha=prc["alpha"])

    def training_config(self, P: float,
                        b_prime: int | None = None) -> TrainingConfig | None:
        trn = self.data["training"]
        if trn is None:
            return None
        rho = trn["rho_tr"]
        if rho is None:
            rho = P / len(self.data["groups"])
        return TrainingConfig(
            b_prime=b_prime if b_prime is not None else trn["b_prime"],
            T=trn["T"], rho_tr=rho, seed=self.seed)


def scenario_from_dict(raw: dict) -> Scenario:
    return Scenario(data=_normalize(raw))


def parse_scenario(source: str | Path) -> Scenario:
    """Parse a YAML scenario from a path or a literal YAML string."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str)
                                    and "\n" not in source
                                    and source.endswith((".yaml", ".yml"))):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"scenario file not found: {path}")
        text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario is not valid YAML: {exc}") from exc
    return scenario_from_dict(raw)


def serialize_scenario(sc: Scenario) -> str:
    """Canonical YAML text; hashing this defines the scenario id."""
    return yaml.safe_dump(sc.data, sort_keys=True, default_flow_style=False)


def _blocked(R: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = B.conj().T @ R @ B
    return 0.5 * (out + out.conj().T)


def _deteq_point(sc: Scenario, specs, pb: PreBeamformer, P: float,
                 tc: TrainingConfig | None) -> DetEqSolution | None:
    """Deterministic equivalent for one SNR point, or None if unsupported."""
    S_g = np.asarray(sc.streams)
    R_list = [s.R for s in specs]
    if sc.processing == "jgp":
        if sc.scheme != "rzf":
            return None
        Bstk = pb.stacked()
        Rtilde = [_blocked(R, Bstk) for R in R_list]
        return deteq_jgp_rzf(Rtilde, pb, S_g, P)
    Rbar = [_blocked(R, Bg) for R, Bg in zip(R_list, pb.blocks)]
    if tc is None:
        fn = deteq_pgp_rzf if sc.scheme == "rzf" else deteq_pgp_zf
        return fn(Rbar, pb, R_list, S_g, P)
    ests = csit_covariances(specs, pb, tc)
    Rhat = [e.Rhat_g for e in ests]
    fn = deteq_pgp_rzf_csit if sc.scheme == "rzf" else deteq_pgp_zf_csit
    return fn(Rbar, Rhat, pb, R_list, S_g, P)


def _mc_point(sc: Scenario, specs, pb: PreBeamformer, cfg: PrecodingConfig,
              tc: TrainingConfig | None, batches) -> np.ndarray:
    # tc must already carry the effective run seed; see _rows_for_point.
    """Per-user SINR of every draw at one SNR point, shape (draws, S)."""
    draws = batches[0].draws
    S = cfg.S
    sinr = np.empty((draws, S))
    Bstk = pb.stacked() if sc.processing == "jgp" else None
    for d in range(draws):
        channels = [batch.H[d] for batch in batches]
        estimates = None
        if tc is not None:
            obs = simulate_training(channels, pb, tc,
                                    path=(_PATH_TRAINING, d))
            ests = mmse_estimate(obs, specs, pb, tc)
            heff = [e.Hhat_g for e in ests]
            estimates = heff
        elif sc.processing == "jgp":
            heff = [Bstk.conj().T @ Hg for Hg in channels]
        else:
            heff = [Bg.conj().T @ Hg
                    for Bg, Hg in zip(pb.blocks, channels)]
        precoders, zetas = build_precoders(cfg, heff, pb)
        report = exact_sinr(cfg, channels, pb, precoders, zetas,
                            signal_estimates=estimates)
        sinr[d] = report.sinr
    return sinr


def _rows_for_point(sc: Scenario, specs, pb, snr_db: float, batches,
                    sid: str, seed: int) -> list[tuple]:
    P = 10.0 ** (snr_db / 10.0)
    cfg = sc.precoding_config(P)
    tc = sc.training_config(P)
    if tc is not None and seed != tc.seed:
        tc = dataclasses.replace(tc, seed=seed)
    tag = sc.method_tag()
    penalty = tc.penalty if tc is not None else 1.0
    snr_txt = f"{snr_db:g}"
    S_g = sc.streams
    group_of = [g for g, s in enumerate(S_g) for _ in range(s)]
    rows: list[tuple] = []

    def emit(group, user, metric, value):
        rows.append((RESULT_SCHEMA, sid, tag, snr_txt, group, user, metric,
                     repr(float(value))))

    sol = _deteq_point(sc, specs, pb, P, tc)
    if sol is not None:
        for g, gamma in enumerate(sol.gamma_o):
            emit(g, "all", "gamma_deteq", gamma)
            emit(g, "all", "rate_deteq", math.log2(1.0 + gamma))
        emit("all", "all", "sum_se_deteq", sol.sum_se(S_g))
        if tc is not None:
            emit("all", "all", "net_sum_se_deteq",
                 penalty * sol.sum_se(S_g))
    if batches is not None:
        sinr = _mc_point(sc, specs, pb, cfg, tc, batches)
        rate = np.log2(1.0 + sinr)
        for k in range(sinr.shape[1]):
            emit(group_of[k], k, "gamma_mc", sinr[:, k].mean())
            emit(group_of[k], k, "rate_mc", rate[:, k].mean())
        for g in range(len(S_g)):
            cols = [k for k in range(sinr.shape[1]) if group_of[k] == g]
            emit(g, "all", "gamma_mc", sinr[:, cols].mean())
            emit(g, "all", "rate_mc", rate[:, cols].mean())
        emit("all", "all", "sum_se_mc", rate.mean(axis=0).sum())
        if tc is not None:
            emit("all", "all", "net_sum_se_mc",
                 penalty * rate.mean(axis=0).sum())
    return rows


def run_scenario(sc: Scenario, out: str | Path | None = None,
                 seed: int | None = None, mc_draws: int | None = None,
                 threads: int = 1) -> Path:
    """Evaluate the scenario over its SNR grid and write the result CSV.

    A manifest recording the scenario id and full config lands next to the
    CSV.  Points of the SNR grid may be solved on ``threads`` workers; rows
    are merged in grid order, and every random quantity is keyed by
    (seed, path), so the bytes written do not depend on the thread count.
    """
    seed = sc.seed if seed is None else int(seed)
    draws = sc.mc_draws if mc_draws is None else int(mc_draws)
    if draws < 0:
        raise ConfigError("mc_draws must be >= 0")
    out_path = Path(out if out is not None else sc.out)
    specs = sc.covariance_specs()
    pb = sc.prebeamformer(specs)
    sid = sc.scenario_id()
    batches = None
    if draws > 0:
        batches = [sample_channels(spec, s, draws, seed,
                                   path=(_PATH_CHANNELS, g))
                   for g, (spec, s) in enumerate(zip(specs, sc.streams))]
    elif sc.processing == "jgp" and sc.scheme == "zf":
        raise ConfigError("jgp-zf has no deterministic equivalent here; "
                          "request Monte Carlo draws")

    def point(snr_db):
        return _rows_for_point(sc, specs, pb, snr_db, batches, sid, seed)

    grid = sc.snr_grid_db
    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(point, grid))
    else:
        chunks = [point(snr) for snr in grid]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for chunk in chunks:
        writer.writerows(chunk)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(buf.getvalue(), encoding="utf-8")
    _write_manifest(out_path, sc, sid)
    return out_path


def _write_manifest(out_path: Path, sc: Scenario, sid: str):
    manifest = {"format": MANIFEST_FORMAT, "package_version": __version__,
                "scenario_id": sid, "config": sc.data}
    text = yaml.safe_dump(manifest, sort_keys=True,
                          default_flow_style=False)
    Path(str(out_path) + ".manifest.yaml").write_text(text, encoding="utf-8")


@dataclass(frozen=True)
class SweepPoint:
    """Net spectral efficiency of one (SNR, training length) grid point."""

    snr_db: float
    b_prime: int
    penalty: float
    se: float
    net_se: float


@dataclass(frozen=True)
class BprimeSweep:
    """Training-length sweep at fixed per-group stream counts."""

    scheme: str
    S_prime: tuple[int, ...]
    T: int
    points: tuple[SweepPoint, ...]

    def at(self, snr_db: float) -> list[SweepPoint]:
        return [p for p in self.points if p.snr_db == snr_db]

    def best(self, snr_db: float) -> SweepPoint:
        pts = self.at(snr_db)
        if not pts:
            raise ConfigError(f"no sweep points at {snr_db} dB")
        return max(pts, key=lambda p: (p.net_se, -p.b_prime))


def _require_training(sc: Scenario) -> dict:
    trn = sc.data["training"]
    if trn is None:
        raise ConfigError("this sweep needs a training section")
    return trn


def _csit_net_se(sc: Scenario, specs, pb, Rbar, S_g, P: float,
                 tc: TrainingConfig) -> tuple[float, float]:
    """(raw sum SE, net sum SE) of the noisy-CSIT deterministic equivalent."""
    ests = csit_covariances(specs, pb, tc)
    Rhat = [e.Rhat_g for e in ests]
    R_list = [s.R for s in specs]
    fn = deteq_pgp_rzf_csit if sc.scheme == "rzf" else deteq_pgp_zf_csit
    sol = fn(Rbar, Rhat, pb, R_list, np.asarray(S_g), P)
    se = sol.sum_se(S_g)
    return se, tc.penalty * se


def sweep_bprime(sc: Scenario, b_range, S_prime=None) -> BprimeSweep:
    """Net SE versus common training length b' over the scenario's SNR grid.

    The pre-beamformer is rebuilt at each width; the estimate covariance
    comes from the closed form, so no channels are drawn.  Points with
    b' >= T carry penalty zero and are recorded with net SE 0 without
    solving anything.  Infeasible widths raise instead of being skipped.
    """
    trn = _require_training(sc)
    if sc.processing != "pgp":
        raise ConfigError("training sweeps apply to per-group processing")
    G = len(sc.data["groups"])
    if S_prime is None:
        S_g = sc.streams
    elif np.isscalar(S_prime):
        S_g = (int(S_prime),) * G
    else:
        S_g = tuple(int(s) for s in S_prime)
    if len(S_g) != G or any(s < 1 for s in S_g):
        raise ConfigError("S_prime must give a positive count per group")
    b_range = [int(b) for b in b_range]
    if not b_range or any(b < 1 for b in b_range):
        raise ConfigError("b_range must list positive training lengths")
    T = trn["T"]
    specs = sc.covariance_specs()
    cache: dict[int, tuple] = {}
    points = []
    for snr_db in sc.snr_grid_db:
        P = 10.0 ** (snr_db / 10.0)
        for bp in b_range:
            tc = sc.training_config(P, b_prime=bp)
            if tc.penalty == 0.0:
                points.append(SweepPoint(snr_db, bp, 0.0, float("nan"), 0.0))
                continue
            if max(S_g) > bp or (sc.scheme == "zf" and max(S_g) >= bp):
                raise FeasibilityError(
                    f"b_prime {bp} cannot carry {max(S_g)} streams per group")
            if bp not in cache:
                pb = sc.prebeamformer(specs, b=bp)
                cache[bp] = (pb, [_blocked(s.R, Bg)
                                  for s, Bg in zip(specs, pb.blocks)])
            pb, Rbar = cache[bp]
            se, net = _csit_net_se(sc, specs, pb, Rbar, S_g, P, tc)
            points.append(SweepPoint(snr_db, bp, tc.penalty, se, net))
    return BprimeSweep(scheme=sc.scheme, S_prime=S_g, T=T,
                       points=tuple(points))


@dataclass(frozen=True)
class SlopePoint:
    """Jointly optimal stream count and training length at one SNR."""

    snr_db: float
    S_prime: int
    b_prime: int
    slope: float
    net_se: float


@dataclass(frozen=True)
class SlopeResult:
    scheme: str
    b_max: int
    points: tuple[SlopePoint, ...]

    def at(self, snr_db: float) -> SlopePoint:
        for p in self.points:
            if p.snr_db == snr_db:
                return p
        raise ConfigError(f"no slope point at {snr_db} dB")


def feasible_width_cap(sc: Scenario, specs=None) -> int:
    """Largest common pre-beamformer width the geometry supports."""
    if specs is None:
        specs = sc.covariance_specs()
    cap = 0
    for b in range(1, sc.data["geometry"]["m"] + 1):
        try:
            sc.prebeamformer(specs, b=b)
        except (FeasibilityError, ConfigError):
            break
        cap = b
    if cap == 0:
        raise FeasibilityError("no feasible pre-beamformer width")
    return cap


def slope_analysis(sc: Scenario, snr_grid_db=None,
                   b_max: int | None = None) -> SlopeResult:
    """Optimize (S', b') jointly on the integer grid at each SNR.

    Every group serves S' streams through width-b' blocks; the score is the
    net noisy-CSIT sum SE.  The reported slope S'*/b'* tracks how the
    optimal loading fraction moves with SNR.  Grid points whose solver
    declares overload are skipped; ties keep the smaller (b', S').
    """
    trn = _require_training(sc)
    if sc.processing != "pgp":
        raise ConfigError("training sweeps apply to per-group processing")
    G = len(sc.data["groups"])
    snrs = tuple(float(s) for s in (snr_grid_db if snr_grid_db is not None
                                    else sc.snr_grid_db))
    specs = sc.covariance_specs()
    cap = b_max if b_max is not None else feasible_width_cap(sc, specs)
    cap = min(cap, trn["T"] - 1)
    if cap < 1:
        raise ConfigError("training block too short for any data phase")
    widths = []
    for bp in range(1, cap + 1):
        pb = sc.prebeamformer(specs, b=bp)
        widths.append((bp, pb, [_blocked(s.R, Bg)
                                for s, Bg in zip(specs, pb.blocks)]))
    points = []
    for snr_db in snrs:
        P = 10.0 ** (snr_db / 10.0)
        best = None
        for bp, pb, Rbar in widths:
            s_top = bp if sc.scheme == "rzf" else bp - 1
            tc = sc.training_config(P, b_prime=bp)
            for sp in range(1, s_top + 1):
                try:
                    se, net = _csit_net_se(sc, specs, pb, Rbar, (sp,) * G,
                                           P, tc)
                except (FeasibilityError, ConvergenceError):
                    continue
                if best is None or net > best[0] + 1e-12:
                    best = (net, sp, bp)
        if best is None:
            raise FeasibilityError(f"no feasible (S', b') point at "
                                   f"{snr_db} dB")
        net, sp, bp = best
        points.append(SlopePoint(snr_db=snr_db, S_prime=sp, b_prime=bp,
                                 slope=sp / bp, net_se=net))
    return SlopeResult(scheme=sc.scheme, b_max=cap, points=tuple(points))
