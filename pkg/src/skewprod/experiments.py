"""The verification experiment registry.

Each experiment simulates at desk scale, runs its statistical or
deterministic checks, and returns a report with one named verdict per
check.  All randomness is keyed off the experiment seed, so reports are
reproducible byte for byte.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import cosets, groups, jumps, levy, linalg, rng as rngmod, scenarios, sde
from .cosets import CosetPoint, RotationGroupCoset, SignedFrameCoset, SphereCoset
from .decompose import decompose_path, detect_exit, extract_angular_jumps
from .paths import CadlagPath
from .scenarios import RadialPoint, make_scenario
from .stats import (chi2_combine, chi2_independence, chi2_sf, ks_two_sample,
                    ks_vs_cdf, moment_z, normal_sf, gammainc_lower)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"  [{tag}] {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    experiment: str
    seed: int
    checks: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, value: float, threshold: float,
            detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), float(value),
                                       float(threshold), detail))

    def summary(self) -> str:
        head = f"{self.experiment}: {'PASS' if self.passed else 'FAIL'} " \
               f"(seed {self.seed})"
        return "\n".join([head] + [c.line() for c in self.checks])

    def to_json(self) -> str:
        body = {
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed,
                        "value": _round12(c.value),
                        "threshold": _round12(c.threshold),
                        "detail": c.detail} for c in self.checks],
        }
        return json.dumps(body, indent=1, sort_keys=True)


def _round12(x: float) -> float:
    if not np.isfinite(x):
        return float(x)
    return float(f"{x:.12g}")


def _salt(name: str) -> int:
    return sum((i + 1) * ord(c) for i, c in enumerate(name)) % 997


def _seed_for(name: str, seed: int) -> int:
    return (int(seed) * 100003 + _salt(name)) % (2 ** 62)


def _scaled(n: int, scale: float, floor: int = 200) -> int:
    return max(floor, int(round(n * scale)))


# --- 1. RADIAL-BESSEL ---------------------------------------------------------

def run_radial_bessel(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("RADIAL-BESSEL", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(10_000, scale)
    geo = make_scenario("euclid_son", 3)
    ends = sde.ambient_ensemble(geo, np.zeros(3), 1.0, 1e-3, n, ms)[:, 0, :]
    sq = np.sum(ends ** 2, axis=1)
    v = ks_vs_cdf(sq, lambda x: np.array([gammainc_lower(1.5, xx / 2.0)
                                          for xx in np.atleast_1d(x)]),
                  alpha=0.01)
    rep.add("radial-squared-vs-chi2_3-KS", v.passed, v.p_value, 0.01,
            f"KS p={v.p_value:.4f} (need > 0.01)")
    z = moment_z(sq, 3.0)
    rep.add("second-moment", abs(z.statistic) <= 3.0, z.statistic, 3.0,
            f"E|x_1|^2 z-score {z.statistic:+.2f} (need |z| <= 3)")
    return rep


# --- 2. RADIAL-MARKOV ---------------------------------------------------------

def run_radial_markov(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("RADIAL-MARKOV", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(20_000, scale)
    geo = make_scenario("euclid_son", 3)
    rec = sde.ambient_ensemble(geo, [1.0, 0.0, 0.0], 1.5, 1e-3, n, ms,
                               record_times=[0.5, 1.0, 1.5])
    r = np.linalg.norm(rec, axis=2)  # (n, 3)
    # condition on the middle value sliced finely (16 quantile slices) so
    # that binning leakage through the conditioning variable stays below
    # test resolution; the outer variables keep their quartile cells
    n_slices = 16
    stats_, dfs = [], []
    edges_mid = np.quantile(r[:, 1], np.linspace(0, 1, n_slices + 1)[1:-1])
    slice_idx = np.digitize(r[:, 1], edges_mid)
    for b in range(n_slices):
        sel = slice_idx == b
        a = r[sel, 0]
        c = r[sel, 2]
        qa = np.quantile(a, [0.25, 0.5, 0.75])
        qc = np.quantile(c, [0.25, 0.5, 0.75])
        table = np.zeros((4, 4))
        ia = np.digitize(a, qa)
        ic = np.digitize(c, qc)
        for i, j in zip(ia, ic):
            table[i, j] += 1
        v = chi2_independence(table)
        stats_.append(v.statistic)
        dfs.append(9)
    combined = chi2_combine(stats_, dfs, alpha=0.01)
    rep.add("conditional-independence-chi2", combined.passed,
            combined.p_value, 0.01,
            f"chi2={combined.statistic:.1f} df={int(np.sum(dfs))} "
            f"p={combined.p_value:.4f} (need > 0.01)")
    return rep


# --- 3/4. skew products ---------------------------------------------------------

def _skew_displacements(geo, x0, T, dt, n, ms, a_star, block=2000):
    """Per path: angular positions at the first crossings of the clock
    levels a_star and 2 a_star, as geodesic distances (d1 from the start,
    d2 between the two crossings).  Paths that exit or never reach 2 a_star
    are dropped (the clock is radial-measurable, so this conditioning does
    not bias the angular law)."""
    steps = sde.n_steps(T, dt)
    d1 = np.full(n, np.nan)
    d2 = np.full(n, np.nan)
    for start in range(0, n, block):
        count = min(block, n - start)
        noise = rngmod.block_normals(ms, start, count, (steps, geo.noise_dim))
        x = np.broadcast_to(np.asarray(x0, float), (count, geo.dim_X)).copy()
        z0 = _angular_of(geo, x)
        z_at1 = np.full((count, z0.shape[1]), np.nan)
        a = np.zeros(count)
        alive = np.ones(count, dtype=bool)
        prev_alpha = _alpha_of(geo, x)
        done1 = np.zeros(count, dtype=bool)
        done2 = np.zeros(count, dtype=bool)
        for s in range(steps):
            x = geo.ambient_step(x, dt, noise[:, s])
            alpha = _alpha_of(geo, x)
            bad = ~np.isfinite(alpha)
            alive &= ~bad
            alpha = np.where(bad, 0.0, alpha)
            a += 0.5 * (prev_alpha + alpha) * dt
            prev_alpha = alpha
            z = _angular_of(geo, x)
            hit1 = alive & ~done1 & (a >= a_star)
            if np.any(hit1):
                z_at1[hit1] = z[hit1]
                d1[start + np.where(hit1)[0]] = _sphere_dist(z[hit1], z0[hit1])
                done1 |= hit1
            hit2 = alive & done1 & ~done2 & (a >= 2 * a_star)
            if np.any(hit2):
                d2[start + np.where(hit2)[0]] = _sphere_dist(z[hit2], z_at1[hit2])
                done2 |= hit2
        del noise
    keep = np.isfinite(d1) & np.isfinite(d2)
    return d1[keep], d2[keep], float(np.mean(keep))


def _angular_of(geo, x):
    if geo.name == "euclid_son":
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    w = x[:, 1:]
    nw = np.linalg.norm(w, axis=1, keepdims=True)
    return w / np.where(nw < 1e-300, 1.0, nw)


def _alpha_of(geo, x):
    if geo.name == "euclid_son":
        return 1.0 / np.sum(x ** 2, axis=1)
    sin2 = np.sum(x[:, 1:] ** 2, axis=1) / np.sum(x ** 2, axis=1)
    with np.errstate(divide="ignore"):
        return np.where(sin2 < 1e-300, np.inf, 1.0 / sin2)


def _sphere_dist(u, v):
    return np.arccos(np.clip(np.sum(u * v, axis=1), -1.0, 1.0))


def _run_skew(name: str, geo, x0, a_star: float, sphere_dim: int,
              seed: int, scale: float) -> ExperimentReport:
    rep = ExperimentReport(name, seed)
    ms = _seed_for(name, seed)
    n = _scaled(10_000, scale)
    d1, d2, kept = _skew_displacements(geo, x0, 1.0, 1e-3, n, ms, a_star)
    rep.add("paths-retained", kept > 0.5, kept, 0.5,
            f"{kept:.1%} of paths reached the 2a* clock level")
    # oracle: independent sphere Brownian displacement at exactly a*
    z0 = np.zeros(sphere_dim + 1)
    z0[0] = 1.0
    oracle_pts = sde.sphere_bm_ensemble(sphere_dim, z0, a_star, 1e-3, n,
                                        ms + 1)[:, 0, :]
    oracle = np.arccos(np.clip(oracle_pts[:, 0], -1.0, 1.0))
    v = ks_two_sample(d1, oracle, alpha=0.01)
    rep.add("displacement-vs-sphere-BM-KS", v.passed, v.p_value, 0.01,
            f"KS p={v.p_value:.4f} n=({len(d1)},{len(oracle)}) (need > 0.01)")
    # independence of increments over disjoint clock intervals
    qa = np.quantile(d1, [0.25, 0.5, 0.75])
    qb = np.quantile(d2, [0.25, 0.5, 0.75])
    table = np.zeros((4, 4))
    for i, j in zip(np.digitize(d1, qa), np.digitize(d2, qb)):
        table[i, j] += 1
    v2 = chi2_independence(table, alpha=0.01)
    rep.add("increment-independence-chi2", v2.passed, v2.p_value, 0.01,
            f"chi2={v2.statistic:.1f} p={v2.p_value:.4f} (need > 0.01)")
    return rep


def run_skew_euclid(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    geo = make_scenario("euclid_son", 3)
    return _run_skew("SKEW-EUCLID", geo, [1.0, 0.0, 0.0], 0.25, 2, seed, scale)


def run_skew_sphere(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    geo = make_scenario("sphere_polar", 3)
    return _run_skew("SKEW-SPHERE", geo, [0.0, 1.0, 0.0, 0.0], 0.35, 2, seed,
                     scale)


# --- 5. COUNTEREXAMPLE ----------------------------------------------------------

def run_counterexample(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("COUNTEREXAMPLE", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(10_000, scale)
    radii, qv_ray, _ = sde.ray_bessel_ensemble(1.0, 1e-3, n, ms)
    geo = make_scenario("euclid_son", 3)
    bm_radii, bm_qv = _bm_radial_and_angular_qv(geo, n, ms + 1)
    v = ks_two_sample(radii, bm_radii, alpha=0.01)
    rep.add("radial-marginal-KS", v.passed, v.p_value, 0.01,
            f"KS p={v.p_value:.4f} vs |BM_3(1)| (need > 0.01)")
    frac_zero = float(np.mean(qv_ray == 0.0))
    rep.add("ray-angular-QV-zero", frac_zero >= 0.99, frac_zero, 0.99,
            f"{frac_zero:.1%} of ray paths have zero angular QV")
    se = np.hypot(np.std(bm_qv, ddof=1) / np.sqrt(len(bm_qv)),
                  np.std(qv_ray, ddof=1) / np.sqrt(len(qv_ray)))
    zdist = float((np.mean(bm_qv) - np.mean(qv_ray)) / se)
    rep.add("QV-distinguisher", zdist > 5.0, zdist, 5.0,
            f"z={zdist:.1f} (need > 5): BM QV {np.mean(bm_qv):.3f} vs ray "
            f"{np.mean(qv_ray):.2e}")
    return rep


def _bm_radial_and_angular_qv(geo, n, ms, T=1.0, dt=1e-3, window=(0.5, 1.0),
                              block=2000):
    steps = sde.n_steps(T, dt)
    w0, w1 = (int(round(w / dt)) for w in window)
    radii = np.empty(n)
    qv = np.zeros(n)
    for start in range(0, n, block):
        count = min(block, n - start)
        noise = rngmod.block_normals(ms, start, count, (steps, 3))
        x = np.zeros((count, 3))
        prev_dir = None
        for s in range(steps):
            x = x + np.sqrt(dt) * noise[:, s]
            if w0 <= s + 1 <= w1:
                d = x / np.linalg.norm(x, axis=1, keepdims=True)
                if prev_dir is not None and s + 1 > w0:
                    ang = np.arccos(np.clip(np.sum(d * prev_dir, axis=1),
                                            -1.0, 1.0))
                    qv[start:start + count] += ang ** 2
                prev_dir = d
        radii[start:start + count] = np.linalg.norm(x, axis=1)
        del noise
    return radii, qv


# --- 6. TRIPLE-RECOVERY ----------------------------------------------------------

def _so3_bm_two_resolutions(T, dt, n_paths, ms, record_stride, block=2500):
    """SO(3) Brownian ensembles at dt and dt/2 from a common Brownian path
    (the fine increments refine the coarse ones by a bridge draw), so the
    difference between the two estimates isolates the discretization."""
    steps = sde.n_steps(T, dt)
    rec = np.arange(0, steps + 1, record_stride)
    if rec[-1] != steps:
        rec = np.append(rec, steps)
    out_c = np.empty((n_paths, len(rec), 3, 3))
    out_f = np.empty((n_paths, len(rec), 3, 3))
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        coarse = rngmod.block_normals(ms, start, count, (steps, 3))
        bridge = rngmod.block_normals(ms, start, count, (steps, 3),
                                      purpose=rngmod.AUX)
        kc = np.broadcast_to(np.eye(3), (count, 3, 3)).copy()
        kf = kc.copy()
        out_c[start:start + count, 0] = kc
        out_f[start:start + count, 0] = kf
        j = 1
        for s in range(steps):
            dw = np.sqrt(dt) * coarse[:, s]
            half = 0.5 * dw
            xi = 0.5 * np.sqrt(dt) * bridge[:, s]
            kc = kc @ sde._so_exp_batch(3, dw)
            kf = kf @ sde._so_exp_batch(3, half + xi) \
                 @ sde._so_exp_batch(3, half - xi)
            if j < len(rec) and rec[j] == s + 1:
                out_c[start:start + count, j] = kc
                out_f[start:start + count, j] = kf
                j += 1
        del coarse, bridge
    return out_c, out_f, rec


def run_triple_recovery(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("TRIPLE-RECOVERY", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(10_000, scale)
    T, dt, stride = 1.0, 1e-3, 40
    ens_c, ens_f, rec = _so3_bm_two_resolutions(T, dt, n, ms, stride)
    times = rec * dt
    coset = RotationGroupCoset(3)
    triple = levy.estimate_triple((times, ens_c), coset, n_grid=25)
    a1 = triple.covariance[-1]
    worst = float(np.max(np.abs(a1 - np.eye(3))))
    rep.add("covariance-entrywise", worst <= 0.05, worst, 0.05,
            f"max |A(1) - I| = {worst:.4f} (need <= 0.05)")
    bnorm = float(np.linalg.norm(triple.drift_coords[-1]))
    b_se = float(np.linalg.norm(triple.drift_se[-1]))
    rep.add("drift-below-3SE", bnorm <= 3 * b_se, bnorm, 3 * b_se,
            f"|b(1)| = {bnorm:.4f} vs 3 SE = {3 * b_se:.4f}")
    mass = triple.total_levy_mass()
    rep.add("levy-mass", mass <= 1e-2, mass, 1e-2,
            f"estimated jump mass {mass:.2e} (need <= 1e-2)")
    triple_f = levy.estimate_triple((times, ens_f), coset, n_grid=25)
    move = float(np.max(np.abs(triple_f.covariance[-1] - a1)))
    se = float(np.max(triple.covariance_se[-1]))
    rep.add("dt-halving-stability", move <= se, move, se,
            f"max covariance move {move:.4f} vs 1 SE = {se:.4f}")
    return rep


# --- 7. MARTINGALE-CHECK ----------------------------------------------------------

def make_continuous_triple(grid: np.ndarray, rate: np.ndarray,
                           coset) -> levy.LevyTriple:
    """Exact triple of a continuous process with constant covariance rate:
    A(t) = t * rate, zero drift, zero Levy measure."""
    m1 = len(grid)
    p = coset.p
    bins = levy.BinGeometry(p, float(coset.chart_radius), 2, 0.5)
    return levy.LevyTriple(
        grid=np.asarray(grid, dtype=float),
        drift_coords=np.zeros((m1, p)),
        covariance=np.asarray(grid)[:, None, None] * np.asarray(rate),
        covariance_se=np.zeros((m1, p, p)),
        bins=bins,
        levy_hist=np.zeros((m1, bins.n_bins)),
        levy_se=np.zeros((m1, bins.n_bins)),
        drift_se=np.zeros((m1, p)),
        n_paths=0, jump_threshold=0.5, space=coset.space)


def run_martingale_check(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("MARTINGALE-CHECK", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(8_000, scale)
    T, dt, stride = 1.0, 1e-3, 10
    ens = sde.so3_bm_ensemble(T, dt, n, ms, record_stride=stride)
    steps = sde.n_steps(T, dt)
    rec = np.arange(0, steps + 1, stride)
    if rec[-1] != steps:
        rec = np.append(rec, steps)
    times = rec * dt
    coset = RotationGroupCoset(3)
    grid = np.linspace(0.0, T, 11)
    true_triple = make_continuous_triple(grid, np.eye(3), coset)
    bad_triple = true_triple.scaled(2.0)
    centers = [np.zeros(3), np.array([0.6, 0.0, 0.0]), np.array([0.0, 0.6, 0.0]),
               np.array([0.0, 0.0, 0.6]), np.array([-0.5, 0.5, 0.0])]
    worst_true = 0.0
    min_bad = np.inf
    for c in centers:
        f = levy.bump_function(coset, c, 1.2)
        means, ses = levy.martingale_residual((times, ens), coset, true_triple, f)
        worst_true = max(worst_true, float(np.max(np.abs(means) / ses)))
        means_b, ses_b = levy.martingale_residual((times, ens), coset,
                                                  bad_triple, f)
        min_bad = min(min_bad, float(np.max(np.abs(means_b) / ses_b)))
    rep.add("true-triple-residuals", worst_true <= 3.0, worst_true, 3.0,
            f"max |residual|/SE over 5 bumps x {len(grid)-1} cells = "
            f"{worst_true:.2f} (need <= 3)")
    rep.add("corrupted-A-detected", min_bad > 3.0, min_bad, 3.0,
            f"doubled covariance: min over bumps of max |residual|/SE = "
            f"{min_bad:.1f} (need > 3)")
    return rep


# --- 8. PI-COUNTING ----------------------------------------------------------------

def run_pi_counting(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("PI-COUNTING", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(10_000, scale)
    T, dt = 1.0, 1e-3
    lam = 2.0
    geo = make_scenario("euclid_son", 3)
    eta = jumps.conjugated_point_mass(3, np.pi / 2, lam)
    stored = sde.simulate_radial_sde(geo, [1.0], T, dt, ms + 7)
    values, rec, jump_log = sde.replay_angular_given_radial(
        geo, stored.points, dt, n, ms, jump_measure=eta, record_stride=20)
    counts = np.array([len(lg) for lg in jump_log], dtype=float)
    z_mean = float((np.mean(counts) - lam * T) / np.sqrt(lam * T / n))
    rep.add("jump-count-mean", abs(z_mean) <= 3, z_mean, 3.0,
            f"mean count z={z_mean:+.2f} vs Poisson({lam * T}) (need |z| <= 3)")
    centered_sq = (counts - np.mean(counts)) ** 2
    z_var = moment_z(centered_sq, lam * T)
    rep.add("jump-count-variance", abs(z_var.statistic) <= 3,
            z_var.statistic, 3.0,
            f"variance z={z_var.statistic:+.2f} (need |z| <= 3)")
    times = rec * dt
    coset = geo.coset
    triple = levy.estimate_triple((times, values), coset, n_grid=50,
                                  boxes_per_axis=3, box_limit=2.0)
    # oracle: the jump-increment law is the angle coordinates of sigma' o;
    # quadrature over the stored radial path is flat because rotations do
    # not move the radius
    g_oracle = rngmod.stream(ms + 13, 0, rngmod.AUX)
    n_or = 200_000
    ks = groups.haar_matrices(3, g_oracle, n_or)
    r0 = jumps.plane_rotation(3, np.pi / 2)
    sigma_e1 = np.einsum("bij,bjk,bk->bi", ks, np.broadcast_to(r0, (n_or, 3, 3)),
                         ks[:, 0, :])
    phi_or, inside_or = coset.coords_batch(sigma_e1)
    assigned = triple.bins.assign(phi_or, inside_or)
    worst_bin_z = 0.0
    worst_route_z = 0.0
    checked = 0
    for b in range(triple.bins.n_bins):
        p_hat = float(np.mean(assigned == b))
        oracle_mass = lam * T * p_hat
        oracle_se = lam * T * np.sqrt(max(p_hat * (1 - p_hat), 1e-12) / n_or)
        est_mass = triple.levy_hist[-1][b]
        est_se = triple.levy_se[-1][b]
        if oracle_mass < 0.02 and est_mass < 0.02:
            continue
        checked += 1
        zb = abs(est_mass - oracle_mass) / np.hypot(oracle_se, max(est_se, 1e-12))
        worst_bin_z = max(worst_bin_z, zb)
        f_bin = levy.bin_indicator(triple.bins, b)
        route2, route2_se = levy.count_jump_functional(jump_log, f_bin)
        zr = abs(est_mass - route2) / np.hypot(max(est_se, 1e-12),
                                               max(route2_se, 1e-12))
        worst_route_z = max(worst_route_z, zr)
    rep.add("binned-levy-vs-pushforward", worst_bin_z <= 3.0, worst_bin_z, 3.0,
            f"max |z| over {checked} populated bins = {worst_bin_z:.2f} "
            "(need <= 3)")
    rep.add("two-estimator-agreement", worst_route_z <= 3.0, worst_route_z, 3.0,
            f"moment-route vs jump-count route: max |z| = {worst_route_z:.2f} "
            "(need <= 3)")
    return rep


# --- 9. DYSON-RADIAL ----------------------------------------------------------------

def run_dyson_radial(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("DYSON-RADIAL", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(10_000, scale)
    geo = make_scenario("sym_matrices", 3)
    lam0 = np.array([2.0, 0.0, -2.0])
    x0 = geo.to_vech(np.diag(lam0))
    # matrix Brownian endpoints are exact Gaussians in the entry coordinates
    g = rngmod.stream(ms, 0, rngmod.AUX)
    vech = x0[None, :] + g.standard_normal((n, geo.dim_X)) * geo._scale
    w, _ = linalg.jacobi_eigh(geo.to_matrix(vech))
    lam_max_matrix = w[:, 0]
    lam_dyson = sde.dyson_ensemble(3, lam0, 1.0, 1e-3, n, ms + 1)[:, 0]
    v = ks_two_sample(lam_max_matrix, lam_dyson, alpha=0.01)
    rep.add("eigenvalue-SDE-vs-matrix-BM-KS", v.passed, v.p_value, 0.01,
            f"KS p={v.p_value:.4f} on lambda_max(1) (need > 0.01)")
    return rep


# --- 10. EIGENFRAME-COVARIANCE --------------------------------------------------------

def run_eigenframe_covariance(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("EIGENFRAME-COVARIANCE", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(10_000, scale)
    T, dt = 1.0, 1e-3
    geo = make_scenario("sym_matrices", 2)
    stored = sde.simulate_radial_sde(geo, [2.0, -2.0], T, dt, ms + 3)
    gaps = stored.points[:, 0] - stored.points[:, 1]
    target = float(np.sum(0.5 * (gaps[1:] ** -2 + gaps[:-1] ** -2) * dt))
    # conditioned frame replay: the frame angle integrates dB / gap
    steps = len(gaps) - 1
    stride = 20
    rec = np.arange(0, steps + 1, stride)
    if rec[-1] != steps:
        rec = np.append(rec, steps)
    thetas = np.empty((n, len(rec)))
    for start in range(0, n, 2000):
        count = min(2000, n - start)
        noise = rngmod.block_normals(ms, start, count, (steps,))
        th = np.zeros(count)
        thetas[start:start + count, 0] = th
        j = 1
        for s in range(steps):
            th = th + np.sqrt(dt) * noise[:, s] / gaps[s]
            if j < len(rec) and rec[j] == s + 1:
                thetas[start:start + count, j] = th
                j += 1
        del noise
    frames = linalg.rot2(thetas)
    coset = SignedFrameCoset(2)
    triple = levy.estimate_triple((rec * dt, frames), coset, n_grid=25)
    a_hat = float(triple.covariance[-1][0, 0])
    rel = abs(a_hat - target) / target
    rep.add("clocked-covariance", rel <= 0.10, rel, 0.10,
            f"A(T)={a_hat:.4f} vs integral {target:.4f}: rel err {rel:.2%} "
            "(need <= 10%)")
    return rep


# --- 11. LIFT --------------------------------------------------------------------------

def run_lift(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("LIFT", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(6_000, scale)
    coset = SphereCoset(3)
    grid = np.linspace(0.0, 1.0, 21)
    triple = make_continuous_triple(grid, np.eye(2), coset)
    g = rngmod.stream(ms, 0, rngmod.AUX)
    lifted = levy.lift_to_group(triple, coset, g, nodes=256)
    a_full = lifted.covariance[-1]
    expect = np.diag([1.0, 1.0, 0.0])
    struct_err = float(np.max(np.abs(a_full - expect)))
    rep.add("lifted-covariance-structure", struct_err <= 1e-12, struct_err,
            1e-12, f"A_full(1) vs diag(1,1,0): max err {struct_err:.1e}")
    # conjugation invariance under M = rotations about the first axis
    worst = 0.0
    for _ in range(20):
        m = coset.sample_m(g)
        ad = groups.adjoint_matrix(m, groups.so_basis(3))
        worst = max(worst, float(np.max(np.abs(ad @ a_full @ ad.T - a_full))))
        worst = max(worst, float(np.max(np.abs(
            m @ lifted.drift_mats[-1] @ m.T - lifted.drift_mats[-1]))))
    rep.add("conjugation-invariance", worst <= 1e-9, worst, 1e-9,
            f"max deviation under Ad(M) {worst:.1e}")
    ends = levy.simulate_group_levy(lifted, 1e-3, n, ms + 1)
    polar_lift = np.arccos(np.clip(ends[:, 0, 0], -1.0, 1.0))
    z0 = np.array([1.0, 0.0, 0.0])
    direct = sde.sphere_bm_ensemble(2, z0, 1.0, 1e-3, n, ms + 2)[:, 0, :]
    polar_direct = np.arccos(np.clip(direct[:, 0], -1.0, 1.0))
    v = ks_two_sample(polar_lift, polar_direct, alpha=0.01)
    rep.add("projected-lift-vs-sphere-BM-KS", v.passed, v.p_value, 0.01,
            f"KS p={v.p_value:.4f} on the polar angle (need > 0.01)")
    return rep


# --- 12. CONVOLUTION-SEMIGROUP ------------------------------------------------------------

def run_convolution_semigroup(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("CONVOLUTION-SEMIGROUP", seed)
    ms = _seed_for(rep.experiment, seed)
    n = _scaled(6_000, scale)
    coset = SphereCoset(3)
    z0 = coset.origin().value
    recs = sde.sphere_bm_ensemble(2, z0, 1.0, 1e-3, n, ms,
                                  record_times=[0.5, 1.0])
    z_half = recs[:, 0, :]
    z_one = recs[:, 1, :]
    mu_0h = z_half  # increments from the origin are the points themselves
    mu_h1 = coset.increment_batch(z_half, z_one)
    g = rngmod.stream(ms + 1, 0, rngmod.AUX)
    conv = levy.empirical_convolution(mu_0h, mu_h1, coset, g)
    dist_conv = np.arccos(np.clip(conv[:, 0], -1.0, 1.0))
    dist_direct = np.arccos(np.clip(z_one[:, 0], -1.0, 1.0))
    v = ks_two_sample(dist_conv, dist_direct, alpha=0.01)
    rep.add("semigroup-KS", v.passed, v.p_value, 0.01,
            f"mu_0,.5 * mu_.5,1 vs mu_0,1: KS p={v.p_value:.4f} (need > 0.01)")
    conv_alt = levy.empirical_convolution(mu_0h, mu_h1, coset, g,
                                          section="alternate")
    dist_alt = np.arccos(np.clip(conv_alt[:, 0], -1.0, 1.0))
    v2 = ks_two_sample(dist_alt, dist_direct, alpha=0.01)
    rep.add("section-independence-KS", v2.passed, v2.p_value, 0.01,
            f"alternate section: KS p={v2.p_value:.4f} (need > 0.01)")
    return rep


# --- 13. DETERMINISTIC ----------------------------------------------------------------------

def run_deterministic(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("DETERMINISTIC", seed)
    g = rngmod.stream(_seed_for(rep.experiment, seed), 0, rngmod.AUX)

    worst = 0.0
    for n_dim in (2, 3, 4):
        basis = groups.so_basis(n_dim)
        for _ in range(40):
            coeffs = g.uniform(-1, 1, len(basis))
            coeffs *= 0.5 / max(np.linalg.norm(coeffs), 1e-12)
            xi = groups.AlgebraElement.from_coefficients(coeffs, basis)
            back = groups.log_map(groups.exp_map(xi), basis)
            worst = max(worst, float(np.linalg.norm(back.coefficients - coeffs)))
    rep.add("exp-log-roundtrip", worst <= 1e-9, worst, 1e-9,
            f"max roundtrip error {worst:.1e} (need <= 1e-9)")

    worst = 0.0
    for coset in (SphereCoset(3), SphereCoset(4), RotationGroupCoset(2),
                  RotationGroupCoset(3), SignedFrameCoset(2), SignedFrameCoset(3)):
        for _ in range(1000 if isinstance(coset, SphereCoset) else 100):
            z = coset.random_point(g)
            sec = coset.section(z).matrix
            back = coset.project_group(sec)
            worst = max(worst, _coset_gap(coset, back, z))
    rep.add("section-property", worst <= 1e-12, worst, 1e-12,
            f"max |pi(S(z)) - z| = {worst:.1e} (need <= 1e-12)")

    worst = 0.0
    for geo in (make_scenario("euclid_son", 3), make_scenario("sphere_polar", 3),
                make_scenario("sym_matrices", 2), make_scenario("sym_matrices", 3)):
        coset = geo.coset
        for _ in range(50):
            phi = g.uniform(-0.25, 0.25, coset.p)
            z = coset.point_from_coords(phi)
            m = coset.sample_m(g)
            lhs = coset.coords(coset.act(m, z) if not isinstance(coset, SignedFrameCoset)
                               else coset.project_group(m @ z.value))
            rhs = coset.ad_m_matrix(m) @ coset.coords(z)
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    rep.add("coordinate-equivariance", worst <= 1e-9, worst, 1e-9,
            f"max equivariance gap {worst:.1e} (need <= 1e-9)")

    worst = 0.0
    for name, size in (("euclid_son", 3), ("sym_matrices", 2),
                       ("sym_matrices", 3), ("sphere_polar", 2),
                       ("sphere_polar", 3), ("product_space", None)):
        geo = make_scenario(name, size)
        f, gz = _split_test_functions(geo)
        for _ in range(10):
            x = geo.random_interior(g)
            lhs, rhs = scenarios.generator_split_residual(geo, f, gz, x)
            rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-8)
            worst = max(worst, rel)
    rep.add("generator-split", worst <= 1e-3, worst, 1e-3,
            f"max relative error {worst:.1e} (need <= 1e-3)")

    spin = np.zeros((3, 3))
    spin[2, 1], spin[1, 2] = 1.0, -1.0
    geo = make_scenario("euclid_son", 3)
    geo.eta_hat = lambda y: [0.7 * spin]
    geo.xi0_hat = lambda y: 0.3 * spin
    worst = 0.0
    for i in range(20):
        rad, frame = sde.integrate_coupled_yk(geo, [1.0], 1.0, 1e-3,
                                              _seed_for("ua", seed), i)
        u, a = sde.factorize_ua(geo, rad, frame)
        err = max(float(np.linalg.norm(u.points[k] @ a.points[k] - frame.points[k]))
                  for k in range(len(frame)))
        worst = max(worst, err)
    rep.add("ua-reconstruction", worst <= 1e-6, worst, 1e-6,
            f"max |u a - k| over 20 paths = {worst:.1e} (need <= 1e-6)")

    elem = groups.GroupElement(np.eye(3))
    factors = [groups.exp_map(groups.AlgebraElement.from_coefficients(
        g.uniform(-0.5, 0.5, 3), groups.so_basis(3))) for _ in range(32)]
    for i in range(10_000):
        elem = elem.compose(factors[i % 32])
    drift = float(np.linalg.norm(elem.matrix.T @ elem.matrix - np.eye(3)))
    rep.add("orthogonality-drift", drift <= 1e-8, drift, 1e-8,
            f"|k^T k - I| after 1e4 compositions = {drift:.1e} (need <= 1e-8)")
    return rep


def _coset_gap(coset, z1, z2) -> float:
    if isinstance(coset, SphereCoset):
        return float(np.linalg.norm(z1.value - z2.value))
    return float(np.linalg.norm(z1.value - z2.value)) \
        if not isinstance(coset, SignedFrameCoset) \
        else min(float(np.linalg.norm(r - z2.value))
                 for r in coset.representatives(z1))


def _split_test_functions(geo):
    if geo.q == 1 and geo.name == "sphere_polar":
        f = lambda y: np.sin(y[0]) ** 2 + 0.3 * np.cos(y[0])
    else:
        f = lambda y: float(np.exp(-0.2 * np.sum((np.atleast_1d(y) - 0.7) ** 2)))
    if isinstance(geo.coset, SphereCoset):
        def gz(z):
            v = z.value if isinstance(z, CosetPoint) else z
            return float(v[0] + 0.4 * v[0] * v[-1])
    else:
        def gz(z):
            v = z.value if isinstance(z, CosetPoint) else z
            a = np.diag(np.arange(1.0, geo.group_n + 1))
            b = np.diag(np.arange(2.0, geo.group_n + 2)[::-1])
            return float(np.trace(a @ v @ b @ v.T))
    return f, gz


# --- 14. CALIBRATION -------------------------------------------------------------------------

def run_calibration(seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    rep = ExperimentReport("CALIBRATION", seed)
    g = rngmod.stream(_seed_for(rep.experiment, seed), 0, rngmod.AUX)
    reps = max(100, int(500 * min(scale, 1.0)))

    rejections = {"ks_two_sample": 0, "ks_vs_cdf": 0, "chi2_independence": 0,
                  "moment_z": 0}
    from math import erf, sqrt
    phi_cdf = lambda x: 0.5 * (1.0 + np.vectorize(erf)(np.asarray(x) / sqrt(2.0)))
    for _ in range(reps):
        a = g.standard_normal(1000)
        b = g.standard_normal(1000)
        if not ks_two_sample(a, b).passed:
            rejections["ks_two_sample"] += 1
        if not ks_vs_cdf(g.standard_normal(1000), phi_cdf).passed:
            rejections["ks_vs_cdf"] += 1
        u = g.standard_normal((2500, 2))
        qa = np.quantile(u[:, 0], [0.25, 0.5, 0.75])
        qb = np.quantile(u[:, 1], [0.25, 0.5, 0.75])
        table = np.zeros((4, 4))
        for i, j in zip(np.digitize(u[:, 0], qa), np.digitize(u[:, 1], qb)):
            table[i, j] += 1
        if not chi2_independence(table).passed:
            rejections["chi2_independence"] += 1
        if not moment_z(g.standard_normal(1000), 0.0).passed:
            rejections["moment_z"] += 1
    for fam, count in rejections.items():
        rate = count / reps
        ok = 0.03 <= rate <= 0.07
        rep.add(f"null-rate-{fam}", ok, rate, 0.05,
                f"rejection rate {rate:.3f} over {reps} reps "
                "(need within [0.03, 0.07])")
    return rep


# --- registry ---------------------------------------------------------------------------------

REGISTRY = {
    "RADIAL-BESSEL": run_radial_bessel,
    "RADIAL-MARKOV": run_radial_markov,
    "SKEW-EUCLID": run_skew_euclid,
    "SKEW-SPHERE": run_skew_sphere,
    "COUNTEREXAMPLE": run_counterexample,
    "TRIPLE-RECOVERY": run_triple_recovery,
    "MARTINGALE-CHECK": run_martingale_check,
    "PI-COUNTING": run_pi_counting,
    "DYSON-RADIAL": run_dyson_radial,
    "EIGENFRAME-COVARIANCE": run_eigenframe_covariance,
    "LIFT": run_lift,
    "CONVOLUTION-SEMIGROUP": run_convolution_semigroup,
    "DETERMINISTIC": run_deterministic,
    "CALIBRATION": run_calibration,
}


def run_experiment(name: str, seed: int = 0, scale: float = 1.0) -> ExperimentReport:
    if name not in REGISTRY:
        raise KeyError(f"unknown experiment {name!r}; registry: "
                       + ", ".join(sorted(REGISTRY)))
    t0 = time.perf_counter()
    rep = REGISTRY[name](seed=seed, scale=scale)
    rep.wall_clock = time.perf_counter() - t0
    return rep
