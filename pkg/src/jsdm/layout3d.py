"""Sector service from an elevated rectangular array.

An N x M array on a tall building serves one 120-degree sector cut into
concentric annular regions.  The channel covariance separates into a
vertical (elevation) factor common to a region and a horizontal (azimuth)
factor per scattering ring, R = R_H kron R_V, so a rank-one vertical beam
q_l per region turns the three-dimensional problem into independent planar
problems: region l sees its horizontal channels scaled by the vertical
beamforming gain |Lambda_V^{1/2} U_V^H q_l|, which also carries the region
pathloss.  Regions too close in elevation to separate cleanly are split
into interleaved patterns served on orthogonal time-frequency shares; the
shares come from a fairness criterion over the per-pattern rates.

Stream counts per group are chosen by an exhaustive grid search over the
per-region loading fractions alpha_l (streams = floor(alpha_l * b_{l,g}))
under equal per-stream power.  The search evaluates the per-group
deterministic equivalents in eigenvalue space: the group resolvent shares
eigenvectors with the group covariance, so every trace the fixed point and
SINR assembly need collapses to weighted sums over eigenvalues, and each
grid point costs O(b) once the per-pair weights are in place.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .covariance import (ArrayGeometry, CovarianceSpec, GroupProfile,
                         eigh_descending, one_ring_covariance)
from .deteq import SolverConfig, deteq_pgp_rzf, deteq_pgp_zf
from .errors import ConfigError, ConvergenceError, FeasibilityError
from .prebeamforming import (PreBeamformer, _null_space_basis, approximate_bd,
                             dft_prebeamforming)

DEFAULT_PATTERNS = ((1, 5), (2, 6), (3, 7), (4, 8))
ALPHA_GRID_STEP = 0.05
_ZF_M_FLOOR = 1e-6  # same overload floor as the matrix-space solver


@dataclass(frozen=True)
class PathlossModel:
    """Distance-based attenuation g(x) = 1 / (1 + (x/d0)^exponent)."""

    exponent: float = 3.8
    d0: float = 30.0

    def __post_init__(self):
        if self.exponent <= 0 or self.d0 <= 0:
            raise ConfigError("pathloss exponent and reference distance "
                              "must be positive")

    def gain(self, x: float) -> float:
        return 1.0 / (1.0 + (x / self.d0) ** self.exponent)


@dataclass(frozen=True)
class CellLayout:
    """Geometry of the sector: distances, heights, array dimensions.

    Angular quantities are derived on demand: each region at distance x sees
    scattering rings of radius ``scatter_radius`` under the azimuth
    half-width arctan(radius/x), and from height h under the elevation
    window [arctan((x-radius)/h), arctan((x+radius)/h)], whose center and
    half-width give the vertical one-ring profile.
    """

    cell_radius: float = 600.0
    bs_height: float = 50.0
    scatter_radius: float = 30.0
    region_distances: tuple[float, ...] = tuple(60.0 * l for l in range(1, 9))
    pathloss: PathlossModel = PathlossModel()
    m: int = 200
    n: int = 300
    spacing: float = 0.5
    sector_half: float = np.pi / 3
    guard: float = 0.01

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ConfigError("array dimensions must be positive")
        if self.spacing <= 0:
            raise ConfigError("element spacing must be positive")
        if not (0 < self.sector_half <= np.pi):
            raise ConfigError("sector half-angle must lie in (0, pi]")
        if self.scatter_radius <= 0 or self.bs_height <= 0:
            raise ConfigError("scatter radius and height must be positive")
        d = np.asarray(self.region_distances, float)
        if d.size == 0 or np.any(d <= self.scatter_radius):
            raise ConfigError("regions must lie beyond one scattering radius")
        if np.any(np.diff(d) <= 0) or d[-1] + self.scatter_radius > self.cell_radius:
            raise ConfigError("region distances must increase and stay in the cell")

    @property
    def regions(self) -> int:
        return len(self.region_distances)

    def distance(self, l: int) -> float:
        if not 1 <= l <= self.regions:
            raise ConfigError(f"region id {l} outside 1..{self.regions}")
        return self.region_distances[l - 1]

    def delta_h(self, l: int) -> float:
        return float(np.arctan(self.scatter_radius / self.distance(l)))

    def delta_v(self, l: int) -> float:
        x = self.distance(l)
        return 0.5 * float(np.arctan((x + self.scatter_radius) / self.bs_height)
                           - np.arctan((x - self.scatter_radius) / self.bs_height))

    def theta_v(self, l: int) -> float:
        x = self.distance(l)
        return 0.5 * float(np.arctan((x + self.scatter_radius) / self.bs_height)
                           + np.arctan((x - self.scatter_radius) / self.bs_height))

    def region_gain(self, l: int) -> float:
        return self.pathloss.gain(self.distance(l))

    def group_azimuths(self, l: int) -> tuple[float, ...]:
        # Left-to-right greedy packing: first ring flush against the sector
        # edge, then strides of one ring width plus a small guard, as many
        # as fit.  Exact positions are a free choice; only the separation
        # |theta_1 - theta_2| > 2 delta_h matters.
        d = self.delta_h(l)
        lo, hi = -self.sector_half + d, self.sector_half - d
        centers = []
        c = lo
        while c <= hi + 1e-12:
            centers.append(c)
            c += 2.0 * d + self.guard
        return tuple(centers)

    def rank_rule(self, l: int, theta: float) -> int:
        """Asymptotic dominant rank M D (sin(theta+delta) - sin(theta-delta))."""
        d = self.delta_h(l)
        val = self.m * self.spacing * (np.sin(theta + d) - np.sin(theta - d))
        return max(1, int(round(val)))

    def horizontal_profiles(self, l: int) -> tuple[GroupProfile, ...]:
        d = self.delta_h(l)
        return tuple(GroupProfile(theta=t, delta=d)
                     for t in self.group_azimuths(l))

    def vertical_profile(self, l: int) -> GroupProfile:
        """Elevation ring of region l; the pathloss rides on its gain."""
        return GroupProfile(theta=self.theta_v(l), delta=self.delta_v(l),
                            gain=self.region_gain(l))


@dataclass(frozen=True)
class RegionGeometry:
    """One annular region: its angular profiles and per-group rank rule."""

    region_id: int
    distance: float
    gain: float
    horizontal: tuple[GroupProfile, ...]
    vertical: GroupProfile
    r_star: tuple[int, ...]

    @property
    def group_count(self) -> int:
        return len(self.horizontal)


def build_layout(layout: CellLayout | None = None,
                 **params) -> tuple[CellLayout, list[RegionGeometry]]:
    """Assemble the sector geometry and the per-region group profiles."""
    if layout is None:
        layout = CellLayout(**params)
    elif params:
        raise ConfigError("pass either a CellLayout or keyword parameters")
    regions = []
    for l in range(1, layout.regions + 1):
        horiz = layout.horizontal_profiles(l)
        if not horiz:
            raise FeasibilityError(
                f"region {l}: no group fits the sector at half-width "
                f"{layout.delta_h(l):.3f} rad")
        regions.append(RegionGeometry(
            region_id=l,
            distance=layout.distance(l),
            gain=layout.region_gain(l),
            horizontal=horiz,
            vertical=layout.vertical_profile(l),
            r_star=tuple(layout.rank_rule(l, p.theta) for p in horiz)))
    return layout, regions


@dataclass(frozen=True)
class Pattern:
    """Set of regions served on the same time-frequency share nu."""

    region_ids: tuple[int, ...]
    nu: float | None = None

    def __post_init__(self):
        ids = tuple(int(i) for i in self.region_ids)
        object.__setattr__(self, "region_ids", ids)
        if len(set(ids)) != len(ids) or any(i < 1 for i in ids) or not ids:
            raise ConfigError("pattern needs distinct region ids >= 1")
        if self.nu is not None and not 0.0 <= self.nu <= 1.0:
            raise ConfigError("time-frequency share must lie in [0, 1]")


def validate_patterns(patterns, regions: int) -> tuple[Pattern, ...]:
    """Check that the patterns partition regions 1..regions (shares sum to 1)."""
    pats = tuple(p if isinstance(p, Pattern) else Pattern(tuple(p))
                 for p in patterns)
    seen = [i for p in pats for i in p.region_ids]
    if sorted(seen) != list(range(1, regions + 1)):
        raise ConfigError(
            f"patterns must partition regions 1..{regions}, got {sorted(seen)}")
    shares = [p.nu for p in pats]
    if all(s is not None for s in shares) and abs(sum(shares) - 1.0) > 1e-9:
        raise ConfigError("time-frequency shares must sum to one")
    return pats


@dataclass(frozen=True)
class VerticalBeams:
    """Per-region vertical beams of one pattern with their gains.

    gain[i] = |Lambda_V^{1/2} U_V^H q_i|; dominance[i] is the second-to-first
    vertical eigenvalue ratio (how safe the rank-one beam is); leakage[i] is
    the largest |U_{V,m}^H q_i| over the other regions of the pattern.
    """

    q: tuple[np.ndarray, ...]
    gain: tuple[float, ...]
    dominance: tuple[float, ...]
    leakage: tuple[float, ...]


def vertical_beamformers(specs_v: list[CovarianceSpec]) -> VerticalBeams:
    """Rank-one vertical beams, one per region of a pattern.

    q_l maximizes the captured power q^H R_{V,l} q inside the orthogonal
    complement of the other regions' retained vertical eigenvectors, so
    inter-region interference through the retained modes is exactly nulled.
    """
    n = specs_v[0].dim
    if any(s.dim != n for s in specs_v):
        raise ConfigError("vertical covariances must share the array size")
    qs, gains, doms, leaks = [], [], [], []
    for i, spec in enumerate(specs_v):
        others = [s.U for j, s in enumerate(specs_v) if j != i]
        if others:
            xi = np.concatenate(others, axis=1)
            if xi.shape[1] >= n:
                raise FeasibilityError(
                    "other regions' vertical eigenmodes fill the array; "
                    "use fewer regions per pattern")
            e0 = _null_space_basis(xi, n)
            lam, v = eigh_descending(e0.conj().T @ spec.R @ e0)
            q = e0 @ v[:, 0]
        else:
            q = spec.U[:, 0].copy()
        q = q / np.linalg.norm(q)
        qs.append(q)
        gains.append(float(np.sqrt(max(np.real(np.vdot(q, spec.R @ q)), 0.0))))
        doms.append(float(spec.lam[1] / spec.lam[0]) if spec.rank > 1 else 0.0)
        leaks.append(max((float(np.linalg.norm(s.U.conj().T @ q))
                          for j, s in enumerate(specs_v) if j != i), default=0.0))
    return VerticalBeams(q=tuple(qs), gain=tuple(gains), dominance=tuple(doms),
                         leakage=tuple(leaks))


@dataclass(frozen=True)
class PlanarRegion:
    """A region reduced to a planar problem: vertical gain folded in."""

    gain: float
    specs: tuple[CovarianceSpec, ...]


def region_effective_channel(q: np.ndarray, spec_v: CovarianceSpec,
                             specs_h: list[CovarianceSpec]) -> PlanarRegion:
    """Collapse the vertical dimension of one region onto the beam q.

    The region's users then see the planar channel scaled by
    c = |Lambda_V^{1/2} U_V^H q|; c^2 multiplies every horizontal covariance
    so the downstream precoding and deterministic equivalents run unchanged
    against unit-variance noise.
    """
    a = np.sqrt(spec_v.lam) * (spec_v.U.conj().T @ q)
    c = float(np.linalg.norm(a))
    scaled = tuple(
        CovarianceSpec(R=c ** 2 * s.R, U=s.U, lam=c ** 2 * s.lam, rank=s.rank,
                       r_star=s.r_star, gain=c ** 2 * s.gain,
                       profile=s.profile, geometry=s.geometry)
        for s in specs_h)
    return PlanarRegion(gain=c, specs=scaled)


@dataclass(frozen=True)
class RegionProblem:
    """Planar JSDM instance of one region: scaled covariances and blocks."""

    region_id: int
    specs: tuple[CovarianceSpec, ...]
    pb: PreBeamformer


def region_problem(region: RegionGeometry, planar: PlanarRegion,
                   layout: CellLayout, method: str = "approx_bd") -> RegionProblem:
    """Pre-beamform one region with b_{l,g} = r*_{l,g} columns per group."""
    if method == "approx_bd":
        pb = approximate_bd(list(planar.specs), r_star=list(region.r_star))
    elif method == "dft":
        pb = dft_prebeamforming(list(region.horizontal), layout.spacing,
                                layout.m, b=list(region.r_star))
    else:
        raise ConfigError(f"unknown pre-beamforming method {method!r}")
    return RegionProblem(region_id=region.region_id, specs=planar.specs, pb=pb)


def _sub_pb(pb: PreBeamformer, keep: list[int]) -> PreBeamformer:
    return PreBeamformer(blocks=tuple(pb.blocks[i] for i in keep),
                         method=pb.method,
                         r_star_used=tuple(pb.r_star_used[i] for i in keep))


def region_deteq(problem: RegionProblem, S_list, P_l: float, scheme: str,
                 cfg: SolverConfig | None = None):
    """Matrix-space deterministic equivalent of one region (reference path).

    Groups with zero streams are silent: they transmit nothing and cause no
    interference, so they are dropped before the solve.  Returns the
    solution together with the list of active group indices.
    """
    if scheme not in ("rzf", "zf"):
        raise ConfigError(f"unknown precoding scheme {scheme!r}")
    act = [g for g, s in enumerate(S_list) if s > 0]
    if not act:
        raise ConfigError("region has no active group")
    pb = _sub_pb(problem.pb, act)
    Rbar = [pb.blocks[i].conj().T @ problem.specs[g].R @ pb.blocks[i]
            for i, g in enumerate(act)]
    R_list = [problem.specs[g].R for g in act]
    S_act = [int(S_list[g]) for g in act]
    if scheme == "rzf":
        sol = deteq_pgp_rzf(Rbar, pb, R_list, S_act, P_l, cfg=cfg)
    else:
        sol = deteq_pgp_zf(Rbar, pb, R_list, S_act, P_l, cfg=cfg)
    return sol, act


class RegionEvaluator:
    """Eigenvalue-space deterministic equivalents for one region.

    The group resolvent T_g = (loading R̄_g / denom + c I)^{-1} shares the
    eigenvectors V_g of R̄_g, so every trace in the fixed point and the SINR
    assembly is a weighted sum over eigenvalues: tr(R̄ T X T) needs only
    diag(V^H X V).  Those diagonals are precomputed once per group pair and
    a stream-allocation grid point then costs O(b) per group.
    """

    def __init__(self, problem: RegionProblem, cfg: SolverConfig | None = None):
        self.cfg = cfg or SolverConfig()
        self.problem = problem
        blocks = problem.pb.blocks
        self.G = len(blocks)
        self.b = tuple(blk.shape[1] for blk in blocks)
        self.lam = []
        self.d_btb = []
        self.d_cross = {}
        vecs = []
        for g, blk in enumerate(blocks):
            Rbar = blk.conj().T @ problem.specs[g].R @ blk
            lam, v = eigh_descending(0.5 * (Rbar + Rbar.conj().T))
            self.lam.append(np.clip(lam, 0.0, None))
            vecs.append(v)
            btb = blk.conj().T @ blk
            self.d_btb.append(np.einsum("ji,jk,ki->i", v.conj(), btb, v).real)
        for g in range(self.G):
            R_g = problem.specs[g].R
            for gp in range(self.G):
                if gp == g:
                    continue
                x = blocks[gp].conj().T @ R_g @ blocks[gp]
                self.d_cross[(g, gp)] = np.einsum(
                    "ji,jk,ki->i", vecs[gp].conj(), x, vecs[gp]).real
        self.r_gain = tuple(float(np.sum(l)) for l in self.lam)

    def _fixed_point(self, lam, loading, alpha, mode):
        m = 1.0
        damping = self.cfg.damping
        non_contracting = 0
        prev_res = np.inf
        for _ in range(self.cfg.max_iter):
            if mode == "zf":
                if m < _ZF_M_FLOOR:
                    raise FeasibilityError(
                        "zero-forcing resolvent trace collapsed to zero; the "
                        "group is overloaded, reduce S_g")
                t = 1.0 / (loading * lam / m + 1.0)
            else:
                t = 1.0 / (loading * lam / (1.0 + m) + alpha)
            m_new = float(np.dot(lam, t)) / lam.size
            res = abs(m_new - m) / (1.0 + abs(m_new))
            m = (1.0 - damping) * m_new + damping * m
            if res <= self.cfg.tol:
                return m, t
            if res >= prev_res:
                non_contracting += 1
                if non_contracting >= 200 and damping < 0.5:
                    damping = 0.5
            prev_res = res
        raise ConvergenceError("region resolvent fixed point did not converge",
                               residual=res, iterations=self.cfg.max_iter)

    def solve(self, S_list, P_l: float, scheme: str,
              alpha: float | None = None) -> tuple[float, np.ndarray]:
        """Sum spectral efficiency and per-group SINRs at this allocation.

        S_list gives streams per group (zeros allowed: silent groups);
        P_l is the region's total power.  Matches the matrix-space
        deterministic equivalents to solver tolerance.
        """
        if scheme not in ("rzf", "zf"):
            raise ConfigError(f"unknown precoding scheme {scheme!r}")
        act = [g for g, s in enumerate(S_list) if s > 0]
        if not act:
            return 0.0, np.zeros(self.G)
        if P_l <= 0:
            raise ConfigError("P must be positive")
        S = int(sum(S_list[g] for g in act))
        if scheme == "zf":
            for g in act:
                if S_list[g] >= self.b[g]:
                    raise FeasibilityError(
                        f"group {g}: zero forcing needs S_g < b_g but "
                        f"{S_list[g]} >= {self.b[g]}")
            alpha = 0.0
        elif alpha is None:
            alpha = S / (sum(self.b[g] for g in act) * P_l)
        m = {}
        t = {}
        D = {}
        n_self = {}
        n_own = {}
        for g in act:
            lam, b_g, S_g = self.lam[g], self.b[g], int(S_list[g])
            m[g], t[g] = self._fixed_point(lam, S_g / b_g, alpha, scheme)
            sq = m[g] ** 2 if scheme == "zf" else (1.0 + m[g]) ** 2
            self_tr = float(np.dot(lam ** 2, t[g] ** 2))
            D[g] = 1.0 - (S_g / b_g) * self_tr / (b_g * sq)
            if D[g] <= 0:
                raise ConvergenceError(
                    f"group {g}: interference denominator non-positive")
            n_self[g] = float(np.dot(lam * t[g] ** 2, self.d_btb[g])) / b_g / D[g]
            n_own[g] = self_tr / b_g / D[g]

        def n_cross(g, gp):
            w = self.lam[gp] * t[gp] ** 2
            return float(np.dot(w, self.d_cross[(g, gp)])) / self.b[gp] / D[gp]

        gamma = np.zeros(self.G)
        if scheme == "rzf":
            one_m2 = {g: (1.0 + m[g]) ** 2 for g in act}
            zeta_sq = {g: self.b[g] * one_m2[g] / n_self[g] for g in act}
            for g in act:
                S_g = int(S_list[g])
                ups_own = (P_l / S) * (S_g - 1) * n_own[g] / (self.b[g] * one_m2[g])
                inter = sum(zeta_sq[gp] * (P_l * S_list[gp] / S) * n_cross(g, gp)
                            / (self.b[gp] * one_m2[gp])
                            for gp in act if gp != g)
                gamma[g] = ((P_l / S) * zeta_sq[g] * m[g] ** 2
                            / (zeta_sq[g] * ups_own + (1.0 + inter) * one_m2[g]))
        else:
            rho = P_l / S
            m2 = {g: m[g] ** 2 for g in act}
            zeta_sq = {g: self.b[g] * m2[g] / n_self[g] for g in act}
            for g in act:
                inter = rho * sum(zeta_sq[gp] * (S_list[gp] / self.b[gp])
                                  * n_cross(g, gp) / m2[gp]
                                  for gp in act if gp != g)
                gamma[g] = rho * zeta_sq[g] / (1.0 + inter)
        se = float(sum(S_list[g] * np.log2(1.0 + gamma[g]) for g in act))
        return se, gamma


@dataclass(frozen=True)
class AllocationResult:
    """Best allocation found on the grid (first grid point on ties)."""

    alpha: tuple[float, ...]
    streams: tuple[tuple[int, ...], ...]
    sum_se: float
    region_se: tuple[float, ...]
    per_stream_power: float


def default_alpha_grid(step: float = ALPHA_GRID_STEP) -> np.ndarray:
    return np.round(np.arange(step, 1.0 + step / 2, step), 12)


def stream_allocation_search(regions: list[RegionProblem], scheme: str,
                             P: float, alpha_grid=None,
                             cfg: SolverConfig | None = None) -> AllocationResult:
    """Exhaustive search over per-region loading fractions for one pattern.

    For every grid combination (alpha_l per region) the stream counts are
    S_{l,g} = floor(alpha_l b_{l,g}), the per-stream power is P over the
    total stream count, and the pattern spectral efficiency sums the
    per-region deterministic equivalents.  Infeasible points (zero-forcing
    overload, non-convergent fixed points) are skipped; the argmax is
    deterministic (lexicographic grid order, strict improvement).
    """
    if P <= 0:
        raise ConfigError("P must be positive")
    grid = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(grid > 1):
        raise ConfigError("alpha grid values must lie in (0, 1]")
    evals = [RegionEvaluator(r, cfg) for r in regions]
    best = None
    saw_streams = False
    for combo in itertools.product(grid, repeat=len(regions)):
        S_rr = [[int(np.floor(a * b + 1e-9)) for b in ev.b]
                for a, ev in zip(combo, evals)]
        total = sum(map(sum, S_rr))
        if total == 0:
            continue
        saw_streams = True
        pbar = P / total
        try:
            se_r = [ev.solve(S_l, pbar * sum(S_l), scheme)[0] if sum(S_l) else 0.0
                    for ev, S_l in zip(evals, S_rr)]
        except (FeasibilityError, ConvergenceError):
            continue
        se = float(sum(se_r))
        if best is None or se > best.sum_se + 1e-12:
            best = AllocationResult(alpha=tuple(float(a) for a in combo),
                                    streams=tuple(tuple(s) for s in S_rr),
                                    sum_se=se, region_se=tuple(se_r),
                                    per_stream_power=pbar)
    if best is None:
        detail = ("every grid point was infeasible" if saw_streams
                  else "the grid allocates zero streams everywhere")
        raise FeasibilityError(f"stream allocation search failed: {detail}")
    return best


@dataclass(frozen=True)
class FairnessReport:
    """Time-frequency shares and scheduled rates under one criterion."""

    criterion: str
    nu: tuple[float, ...]
    scheduled: tuple[float, ...]
    total: float


def fairness_allocate(pattern_rates, criterion: str) -> FairnessReport:
    """Closed-form time-frequency shares over patterns.

    Proportional fairness (log-sum utility) splits the dimensions evenly,
    nu_q = 1/Q; max-min fairness equalizes the scheduled rates,
    nu_q proportional to 1/R*_q.
    """
    rates = np.asarray(pattern_rates, float)
    if rates.ndim != 1 or rates.size == 0:
        raise ConfigError("one positive rate per pattern is required")
    if np.any(rates <= 0):
        raise ConfigError("pattern rates must be positive")
    crit = criterion.lower()
    if crit == "pfs":
        nu = np.full(rates.size, 1.0 / rates.size)
    elif crit == "maxmin":
        inv = 1.0 / rates
        nu = inv / inv.sum()
    else:
        raise ConfigError(f"unknown fairness criterion {criterion!r}")
    scheduled = nu * rates
    return FairnessReport(criterion=crit, nu=tuple(map(float, nu)),
                          scheduled=tuple(map(float, scheduled)),
                          total=float(scheduled.sum()))


@dataclass(frozen=True)
class PatternResult:
    """One pattern's allocation search outcome."""

    region_ids: tuple[int, ...]
    allocation: AllocationResult
    vertical_gain: tuple[float, ...]
    vertical_leakage: tuple[float, ...]


@dataclass(frozen=True)
class SectorResult:
    """Full sector evaluation: per-pattern rates and fairness totals."""

    patterns: tuple[PatternResult, ...]
    pfs: FairnessReport
    maxmin: FairnessReport

    @property
    def pattern_rates(self) -> tuple[float, ...]:
        return tuple(p.allocation.sum_se for p in self.patterns)


def evaluate_sector(P: float, layout: CellLayout | None = None, *,
                    patterns=DEFAULT_PATTERNS, scheme: str = "rzf",
                    method: str = "approx_bd", alpha_grid=None,
                    cfg: SolverConfig | None = None,
                    quad_tol: float = 1e-8) -> SectorResult:
    """End-to-end sector run: layout, vertical beams, per-pattern search.

    P is the total transmit power of a pattern (each pattern uses the full
    power on its own time-frequency share).  Returns the per-pattern
    allocations and both fairness schedules.
    """
    layout, geoms = build_layout(layout)
    pats = validate_patterns(patterns, layout.regions)
    geom_h = ArrayGeometry("ula", layout.m, spacing=layout.spacing)
    geom_v = ArrayGeometry("ula", layout.n, spacing=layout.spacing)
    spec_v = {r.region_id: one_ring_covariance(geom_v, r.vertical,
                                               quad_tol=quad_tol)
              for r in geoms}
    spec_h = {r.region_id: [one_ring_covariance(geom_h, p, quad_tol=quad_tol)
                            for p in r.horizontal]
              for r in geoms}
    results = []
    for pat in pats:
        ids = pat.region_ids
        beams = vertical_beamformers([spec_v[l] for l in ids])
        problems = []
        for i, l in enumerate(ids):
            region = geoms[l - 1]
            planar = region_effective_channel(beams.q[i], spec_v[l], spec_h[l])
            problems.append(region_problem(region, planar, layout, method))
        alloc = stream_allocation_search(problems, scheme, P,
                                         alpha_grid=alpha_grid, cfg=cfg)
        results.append(PatternResult(region_ids=ids, allocation=alloc,
                                     vertical_gain=beams.gain,
                                     vertical_leakage=beams.leakage))
    rates = [r.allocation.sum_se for r in results]
    return SectorResult(patterns=tuple(results),
                        pfs=fairness_allocate(rates, "pfs"),
                        maxmin=fairness_allocate(rates, "maxmin"))
