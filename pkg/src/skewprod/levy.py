"""Estimation of the nonhomogeneous-Levy representation (drift, covariance,
Levy measure) of an angular ensemble, with the supporting machinery:
empirical convolution of coset-valued samples, the martingale-residual
diagnostic, jump-count functionals, and the lift to a conjugation-invariant
triple on the full group.

The estimator follows the constructive discretization: per grid cell the
empirical increment law splits at a threshold into a small part (drift from
mean exponential coordinates, covariance from centered second moments) and
a large part (binned into the Levy histogram).  Increments beyond the chart
radius go to the overflow bin regardless of the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import groups, linalg, rng as rngmod
from .cosets import CosetGeometry, CosetPoint, SphereCoset
from .decompose import DecomposedPath


class EstimationError(ValueError):
    pass


# --- histogram geometry -------------------------------------------------------

@dataclass(frozen=True)
class BinGeometry:
    """Axis-aligned boxes in exponential coordinates, an o-ball that never
    holds mass, and one overflow bin for everything beyond the chart."""

    p: int
    box_limit: float
    boxes_per_axis: int
    o_radius: float

    @property
    def n_boxes(self) -> int:
        return self.boxes_per_axis ** self.p

    @property
    def n_bins(self) -> int:
        return self.n_boxes + 1  # + overflow

    @property
    def overflow_index(self) -> int:
        return self.n_boxes

    def edges(self) -> np.ndarray:
        return np.linspace(-self.box_limit, self.box_limit,
                           self.boxes_per_axis + 1)

    def assign(self, phi: np.ndarray, inside_chart: np.ndarray) -> np.ndarray:
        """Bin index per row: -1 for the o-ball, overflow for out-of-chart
        or out-of-box increments."""
        phi = np.asarray(phi, dtype=float)
        n = phi.shape[0]
        out = np.full(n, self.overflow_index, dtype=int)
        norms = np.where(inside_chart, np.linalg.norm(phi, axis=-1), np.inf)
        small = norms <= self.o_radius
        out[small] = -1
        boxable = inside_chart & ~small \
            & np.all(np.abs(phi) < self.box_limit, axis=-1)
        if np.any(boxable):
            e = self.edges()
            idx = np.zeros(int(np.sum(boxable)), dtype=int)
            sub = phi[boxable]
            for ax in range(self.p):
                k = np.clip(np.digitize(sub[:, ax], e) - 1, 0,
                            self.boxes_per_axis - 1)
                idx = idx * self.boxes_per_axis + k
            out[boxable] = idx
        return out

    def centers(self) -> np.ndarray:
        e = self.edges()
        mid = 0.5 * (e[:-1] + e[1:])
        grids = np.meshgrid(*([mid] * self.p), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


# --- the triple ---------------------------------------------------------------

@dataclass
class LevyTriple:
    """Estimated representation of an angular ensemble on one time grid.

    covariance[t] is the cumulative matrix A(t); levy_hist[t] the cumulative
    expected jump counts per bin; drift_coords[t] the exponential
    coordinates of the running drift point b_t.
    """

    grid: np.ndarray
    drift_coords: np.ndarray
    covariance: np.ndarray
    covariance_se: np.ndarray
    bins: BinGeometry
    levy_hist: np.ndarray
    levy_se: np.ndarray
    drift_se: np.ndarray = None  # type: ignore[assignment]
    fixed_jumps: list = field(default_factory=list)
    n_paths: int = 0
    jump_threshold: float = 0.0
    space: str = ""

    def total_levy_mass(self) -> float:
        return float(np.sum(self.levy_hist[-1]))

    def covariance_increments(self) -> np.ndarray:
        return np.diff(self.covariance, axis=0)

    def scaled(self, factor: float) -> "LevyTriple":
        """Copy with the covariance multiplied by factor (negative-control
        corruption for the martingale diagnostic)."""
        return LevyTriple(self.grid, self.drift_coords,
                          self.covariance * factor, self.covariance_se,
                          self.bins, self.levy_hist, self.levy_se,
                          self.drift_se, self.fixed_jumps, self.n_paths,
                          self.jump_threshold, self.space)


def _ensemble_arrays(ensemble, coset: CosetGeometry):
    """Accept either a list of decomposed paths or (times, values)."""
    if isinstance(ensemble, tuple):
        times, values = ensemble
        return np.asarray(times, dtype=float), np.asarray(values, dtype=float)
    if isinstance(ensemble, list) and ensemble and isinstance(ensemble[0], DecomposedPath):
        times = ensemble[0].angular.times
        values = np.stack([d.angular.points for d in ensemble])
        return np.asarray(times, dtype=float), values
    raise TypeError("ensemble must be a list of DecomposedPath or a "
                    "(times, values) pair")


def estimate_triple(ensemble, coset: CosetGeometry, n_grid: int,
                    jump_threshold: float | None = None,
                    fixed_jump_times=(), boxes_per_axis: int = 3,
                    box_limit: float | None = None) -> LevyTriple:
    """Estimate (drift, covariance, Levy histogram) from an angular ensemble.

    All paths must share the grid.  Known fixed-jump times are removed
    first: the cells containing them contribute empirical increment
    ensembles instead of entering the continuous estimates.
    """
    times, values = _ensemble_arrays(ensemble, coset)
    n_paths = values.shape[0]
    if n_paths < 100:
        raise EstimationError(
            f"ensemble of {n_paths} paths is too small for stable "
            "estimation; use at least 100")
    n_rec = values.shape[1]
    if n_grid >= n_rec:
        raise EstimationError("n_grid must be below the recorded resolution")
    idx = np.unique(np.round(np.linspace(0, n_rec - 1, n_grid + 1)).astype(int))
    grid = times[idx]
    m = len(idx) - 1

    phis = []
    insides = []
    for c in range(m):
        inc = coset.increment_batch(values[:, idx[c]], values[:, idx[c + 1]])
        phi, inside = coset.coords_batch(inc)
        phis.append(phi)
        insides.append(inside)

    fixed_cells = set()
    fixed_jumps = []
    for t_fixed in sorted(fixed_jump_times):
        for c in range(m):
            if grid[c] < t_fixed <= grid[c + 1]:
                fixed_cells.add(c)
                fixed_jumps.append((float(t_fixed), phis[c]))
                break

    live = [c for c in range(m) if c not in fixed_cells]
    if jump_threshold is None:
        jump_threshold = _default_threshold(phis, insides, live)

    p = coset.p
    if box_limit is None:
        box_limit = float(coset.chart_radius)
    bins = BinGeometry(p, box_limit, boxes_per_axis, jump_threshold)

    drift_coords = np.zeros((m + 1, p))
    drift_var = np.zeros((m + 1, p))
    cov = np.zeros((m + 1, p, p))
    cov_se = np.zeros((m + 1, p, p))
    hist = np.zeros((m + 1, bins.n_bins))
    hist_se = np.zeros((m + 1, bins.n_bins))
    per_path_cum = np.zeros((n_paths, p, p))
    cum_counts = np.zeros(bins.n_bins)
    b_point = coset.origin()
    for c in range(m):
        if c in fixed_cells:
            drift_coords[c + 1] = drift_coords[c]
            drift_var[c + 1] = drift_var[c]
            cov[c + 1] = cov[c]
            cov_se[c + 1] = cov_se[c]
            hist[c + 1] = hist[c]
            hist_se[c + 1] = hist_se[c]
            continue
        phi, inside = phis[c], insides[c]
        norms = np.where(inside, np.linalg.norm(phi, axis=-1), np.inf)
        small = norms <= jump_threshold
        n_small = int(np.sum(small))
        b_cell = (np.mean(phi[small], axis=0) if n_small else np.zeros(p))
        # drift path: compose the running point with the cell increment
        b_point = _compose(coset, b_point, b_cell)
        drift_coords[c + 1] = _coords_or_zero(coset, b_point)
        drift_var[c + 1] = drift_var[c] + (np.var(phi[small], axis=0, ddof=1)
                                           / max(n_small, 2) if n_small > 1
                                           else 0.0)
        centered = np.where(small[:, None], phi - b_cell, 0.0)
        contrib = centered[:, :, None] * centered[:, None, :]
        per_path_cum += contrib
        cov[c + 1] = np.mean(per_path_cum, axis=0)
        cov_se[c + 1] = np.std(per_path_cum, axis=0, ddof=1) / np.sqrt(n_paths)
        assigned = bins.assign(phi, inside)
        counts = np.bincount(assigned[assigned >= 0], minlength=bins.n_bins)
        cum_counts += counts
        hist[c + 1] = cum_counts / n_paths
        hist_se[c + 1] = np.sqrt(cum_counts) / n_paths
    return LevyTriple(grid, drift_coords, cov, cov_se, bins, hist, hist_se,
                      np.sqrt(drift_var), fixed_jumps, n_paths, jump_threshold,
                      coset.space)


def _default_threshold(phis, insides, live_cells) -> float:
    """5 sigma sqrt(dt) rule from the largest per-cell diagonal variance,
    iterated once on the sub-threshold set."""
    worst = 0.0
    for c in live_cells:
        phi, inside = phis[c], insides[c]
        if np.sum(inside) > 1:
            worst = max(worst, float(np.max(np.var(phi[inside], axis=0))))
    thr = 5.0 * np.sqrt(worst)
    worst2 = 0.0
    for c in live_cells:
        phi, inside = phis[c], insides[c]
        keep = inside & (np.linalg.norm(np.where(inside[:, None], phi, 0.0),
                                        axis=-1) <= thr)
        if np.sum(keep) > 1:
            worst2 = max(worst2, float(np.max(np.var(phi[keep], axis=0))))
    return 5.0 * np.sqrt(worst2) if worst2 > 0 else thr


def _compose(coset: CosetGeometry, b_point: CosetPoint, b_cell: np.ndarray):
    step = coset.point_from_coords(b_cell)
    sec = coset.section(b_point).matrix
    return coset.project_group(sec @ coset.section(step).matrix)


def _coords_or_zero(coset, z) -> np.ndarray:
    try:
        return coset.coords(z)
    except Exception:
        return np.zeros(coset.p)


# --- jump-count functional ------------------------------------------------------

def count_jump_functional(jump_logs, f, n_paths: int | None = None):
    """Ensemble average of the path sum of f over recorded angular jumps.

    jump_logs is a list over paths of (time, phi) pairs, phi = None when the
    jump left the chart; f receives phi (or None) and must vanish on the
    threshold ball.  Returns (mean, standard error).
    """
    n = len(jump_logs) if n_paths is None else n_paths
    sums = np.zeros(n)
    for i, log in enumerate(jump_logs):
        sums[i] = sum(f(phi) for _, phi in log)
    mean = float(np.mean(sums))
    se = float(np.std(sums, ddof=1)) / np.sqrt(n) if n > 1 else 0.0
    return mean, se


def bin_indicator(bins: BinGeometry, bin_index: int):
    """f = indicator of one histogram bin (vanishes on the o-ball)."""

    def f(phi):
        if phi is None:
            return 1.0 if bin_index == bins.overflow_index else 0.0
        a = bins.assign(np.asarray(phi, dtype=float)[None, :],
                        np.array([True]))[0]
        return 1.0 if a == bin_index else 0.0

    return f


# --- empirical convolution -------------------------------------------------------

def sample_m_batch(coset: CosetGeometry, rng: np.random.Generator,
                   count: int) -> np.ndarray:
    if isinstance(coset, SphereCoset) and coset.group_n > 2:
        d = coset.group_n
        out = np.zeros((count, d, d))
        out[:, 0, 0] = 1.0
        out[:, 1:, 1:] = groups.haar_matrices(d - 1, rng, count)
        return out
    elems = coset.m_elements()
    if elems is not None:
        picks = rng.integers(len(elems), size=count)
        return np.stack([elems[i] for i in picks])
    return np.stack([coset.sample_m(rng) for _ in range(count)])


def empirical_convolution(mu_values: np.ndarray, nu_values: np.ndarray,
                          coset: CosetGeometry, rng: np.random.Generator,
                          section: str = "canonical") -> np.ndarray:
    """Samples of the convolution of two invariant laws on K/M.

    The second factor is symmetrized over M first (its law must be
    M-invariant for the product to be well defined); then each output is
    S(x_i) applied to a randomly paired y_j.  The result's law does not
    depend on the section map; passing section="alternate" exercises that.
    """
    mu_values = np.asarray(mu_values, dtype=float)
    nu_values = np.asarray(nu_values, dtype=float)
    ms = sample_m_batch(coset, rng, len(nu_values))
    nu_sym = coset.act_batch(ms, nu_values)
    pair = rng.integers(len(nu_sym), size=len(mu_values))
    if section == "canonical":
        secs = coset.section_batch(mu_values)
    elif section == "alternate":
        secs = _section_batch_alternate(coset, mu_values)
    else:
        raise ValueError("section must be 'canonical' or 'alternate'")
    return coset.act_batch(secs, nu_sym[pair])


def _section_batch_alternate(coset: CosetGeometry, zs: np.ndarray) -> np.ndarray:
    """A second valid section: for spheres, the two chart anchors swap
    priority, which changes the section on most of the space."""
    if not isinstance(coset, SphereCoset):
        return coset.section_batch(zs)
    flip = coset._flip
    zs = np.asarray(zs, dtype=float)
    near_origin = zs[..., 0] > np.cos(0.35)
    flipped = zs @ flip.T
    sec = flip @ coset.section_batch(flipped)
    canon = coset.section_batch(zs)
    return np.where(near_origin[..., None, None], canon, sec)


# --- martingale residual ----------------------------------------------------------

def lie_push_batch(coset: CosetGeometry, zs: np.ndarray,
                   g_const: np.ndarray) -> np.ndarray:
    """Model points of S(z) g acting on the origin, batched over z."""
    secs = coset.section_batch(zs)
    moved = secs @ g_const
    if isinstance(coset, SphereCoset):
        return moved[..., :, 0]
    return moved


def first_lie_derivative_batch(coset, f, zs, i, h=1e-5):
    e_plus = linalg.expm(h * coset.basis_p[i])
    e_minus = linalg.expm(-h * coset.basis_p[i])
    return (f(lie_push_batch(coset, zs, e_plus))
            - f(lie_push_batch(coset, zs, e_minus))) / (2.0 * h)


def second_lie_derivative_batch(coset, f, zs, i, j, h=1e-5,
                                conj: np.ndarray | None = None):
    """xi_i xi_j f on a batch, optionally with both fields conjugated by a
    fixed group element (the Ad(b) twist of the representation formula)."""
    ei_p = linalg.expm(h * coset.basis_p[i])
    ei_m = linalg.expm(-h * coset.basis_p[i])
    ej_p = linalg.expm(h * coset.basis_p[j])
    ej_m = linalg.expm(-h * coset.basis_p[j])
    if conj is not None:
        ci = conj
        ei_p, ei_m = ci @ ei_p @ ci.T, ci @ ei_m @ ci.T
        ej_p, ej_m = ci @ ej_p @ ci.T, ci @ ej_m @ ci.T
    return (f(lie_push_batch(coset, zs, ei_p @ ej_p))
            - f(lie_push_batch(coset, zs, ei_p @ ej_m))
            - f(lie_push_batch(coset, zs, ei_m @ ej_p))
            + f(lie_push_batch(coset, zs, ei_m @ ej_m))) / (4.0 * h * h)


def martingale_residual(ensemble, coset: CosetGeometry, triple: LevyTriple,
                        f, h: float = 1e-5):
    """Mean compensated increment of f per triple grid cell, with standard
    errors.  Under the true triple every cell mean sits within noise of 0;
    a corrupted covariance shows up as a systematic residual.

    The ensemble should be recorded on a grid at least as fine as the
    triple's; the quadrature of the covariance integral runs at the
    recorded resolution.
    """
    times, values = _ensemble_arrays(ensemble, coset)
    if abs(times[0] - triple.grid[0]) > 1e-9 or times[-1] < triple.grid[-1] - 1e-9:
        raise EstimationError("ensemble grid does not cover the triple grid")
    n_paths = values.shape[0]
    m = len(triple.grid) - 1
    cell_sums = np.zeros((n_paths, m))
    # covariance interpolated onto the recorded grid
    a_interp = np.stack([
        np.interp(times, triple.grid, triple.covariance[:, i, j])
        for i in range(coset.p) for j in range(coset.p)
    ], axis=-1).reshape(len(times), coset.p, coset.p)
    drift_interp = np.stack([
        np.interp(times, triple.grid, triple.drift_coords[:, i])
        for i in range(coset.p)
    ], axis=-1)
    d_hist = np.diff(np.stack([
        np.interp(times, triple.grid, triple.levy_hist[:, b])
        for b in range(triple.bins.n_bins)
    ], axis=-1), axis=0)
    centers = triple.bins.centers()
    has_jumps = triple.total_levy_mass() > 1e-12
    cell_of = np.clip(np.searchsorted(triple.grid, times[1:], side="left") - 1,
                      0, m - 1)
    for s in range(len(times) - 1):
        zs = values[:, s]
        inc = f(values[:, s + 1]) - f(zs)
        da = a_interp[s + 1] - a_interp[s]
        b_coords = drift_interp[s]
        conj = None
        if np.linalg.norm(b_coords) > 1e-12:
            conj = coset.section(coset.point_from_coords(b_coords)).matrix
        comp = np.zeros(n_paths)
        for i in range(coset.p):
            for j in range(coset.p):
                if abs(da[i, j]) < 1e-16:
                    continue
                comp += 0.5 * da[i, j] * second_lie_derivative_batch(
                    coset, f, zs, i, j, h, conj)
        if has_jumps:
            comp += _jump_compensator(coset, f, zs, d_hist[s], centers,
                                      triple.bins, conj, h)
        cell_sums[:, cell_of[s]] += inc - comp
    means = np.mean(cell_sums, axis=0)
    ses = np.std(cell_sums, axis=0, ddof=1) / np.sqrt(n_paths)
    return means, ses


def _jump_compensator(coset, f, zs, d_hist_row, centers, bins, conj, h):
    out = np.zeros(zs.shape[0])
    for b in range(bins.n_boxes):
        w = d_hist_row[b]
        if w <= 1e-14:
            continue
        tau = coset.section(coset.point_from_coords(centers[b])).matrix
        g_mat = tau if conj is None else conj @ tau @ conj.T
        term = f(lie_push_batch(coset, zs, g_mat)) - f(zs)
        for i in range(coset.p):
            term -= centers[b][i] * first_lie_derivative_batch(coset, f, zs, i, h)
        out += w * term
    return out


def bump_function(coset: CosetGeometry, center, width: float):
    """Smooth compactly supported test function built on the exponential
    chart: a cubic bump of the squared coordinate distance to the center."""
    center = np.asarray(center, dtype=float)

    def f(zs: np.ndarray) -> np.ndarray:
        zs = np.asarray(zs, dtype=float)
        single = zs.ndim == (1 if isinstance(coset, SphereCoset) else 2)
        batch = zs[None] if single else zs
        phi, inside = coset.coords_batch(batch)
        u = np.sum((phi - center) ** 2, axis=-1) / width ** 2
        vals = np.where(inside & (u < 1.0), (1.0 - np.minimum(u, 1.0)) ** 3, 0.0)
        return vals[0] if single else vals

    return f


# --- lift to the group --------------------------------------------------------------

@dataclass
class GroupLevyTriple:
    """Conjugation-invariant triple on K whose projection is the source
    triple on K/M."""

    grid: np.ndarray
    drift_mats: np.ndarray          # (m+1, n, n) group-valued drift path
    covariance: np.ndarray          # (m+1, full, full) in the so(n) basis
    pi_atoms: list                  # (matrix, cumulative-mass column (m+1,))
    group_n: int


def lift_to_group(triple: LevyTriple, coset: CosetGeometry,
                  rng: np.random.Generator, nodes: int = 1024) -> GroupLevyTriple:
    """Average the drift over M, pad the covariance onto the full algebra
    basis, and conjugation-spread the Levy histogram.

    M-averaging is exact (an enumeration) for finite M, Monte-Carlo Haar
    quadrature otherwise.
    """
    n = coset.group_n
    full = groups.so_basis(n)
    p_idx = _p_indices_in_full(coset, full)
    m_elems = coset.m_elements()
    if m_elems is None:
        m_nodes = [coset.sample_m(rng) for _ in range(nodes)]
    else:
        m_nodes = m_elems
    grid_len = len(triple.grid)
    drift_mats = np.empty((grid_len, n, n))
    for t in range(grid_len):
        b_point = coset.point_from_coords(triple.drift_coords[t])
        b_rep = coset.section(b_point).matrix
        if np.linalg.norm(b_rep - np.eye(n)) < 1e-14:
            drift_mats[t] = np.eye(n)
            continue
        xi = linalg.logm(b_rep)
        avg = np.mean([h @ xi @ h.T for h in m_nodes], axis=0)
        drift_mats[t] = linalg.expm(0.5 * (avg - avg.T))
    cov_full = np.zeros((grid_len, len(full), len(full)))
    for a, ia in enumerate(p_idx):
        for b, ib in enumerate(p_idx):
            cov_full[:, ia, ib] = triple.covariance[:, a, b]
    atoms = []
    centers = triple.bins.centers()
    for b in range(triple.bins.n_boxes):
        masses = triple.levy_hist[:, b]
        if masses[-1] <= 0:
            continue
        base = coset.section(coset.point_from_coords(centers[b])).matrix
        for h_node in m_nodes:
            atoms.append((h_node @ base @ h_node.T, masses / len(m_nodes)))
    return GroupLevyTriple(triple.grid, drift_mats, cov_full, atoms, n)


def _p_indices_in_full(coset: CosetGeometry, full) -> list[int]:
    out = []
    for b in coset.basis_p:
        for i, fb in enumerate(full):
            if np.array_equal(b, fb):
                out.append(i)
                break
    return out


def simulate_group_levy(gtriple: GroupLevyTriple, dt: float, n_paths: int,
                        master_seed: int, block: int = 2500) -> np.ndarray:
    """Endpoints of the group-valued process built from a lifted triple:
    Gaussian exponential steps from the covariance rate, drift increments
    from the drift path, Poisson jumps from the atom list."""
    from .sde import _so_exp_batch, poisson_times
    n = gtriple.group_n
    full_dim = gtriple.covariance.shape[-1]
    grid = gtriple.grid
    T = float(grid[-1])
    steps = int(round(T / dt))
    ts = np.arange(steps + 1) * dt
    # piecewise rates
    rates = np.zeros((steps, full_dim, full_dim))
    for s in range(steps):
        c = np.clip(np.searchsorted(grid, ts[s + 1]) - 1, 0, len(grid) - 2)
        da = (gtriple.covariance[c + 1] - gtriple.covariance[c]) \
            / max(grid[c + 1] - grid[c], 1e-300)
        rates[s] = da
    sqrts = np.empty_like(rates)
    for s in range(steps):
        w, v = linalg.jacobi_eigh(rates[s])
        sqrts[s] = v @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.T
    drift_steps = np.empty((steps, n, n))
    for s in range(steps):
        b0 = _interp_group(gtriple.drift_mats, grid, ts[s])
        b1 = _interp_group(gtriple.drift_mats, grid, ts[s + 1])
        drift_steps[s] = b0.T @ b1
    jump_rate = sum(a[1][-1] for a in gtriple.pi_atoms) / max(T, 1e-300)
    out = np.empty((n_paths, n, n))
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, full_dim))
        g = np.broadcast_to(np.eye(n), (count, n, n)).copy()
        jumpers = []
        size_streams = []
        if jump_rate > 0:
            weights = np.array([a[1][-1] for a in gtriple.pi_atoms])
            weights = weights / weights.sum()
            for i in range(count):
                gi = rngmod.stream(master_seed, start + i, rngmod.JUMP_TIMES)
                jumpers.append(poisson_times(jump_rate, T, gi))
                size_streams.append(rngmod.stream(master_seed, start + i,
                                                  rngmod.JUMP_SIZES))
        for s in range(steps):
            coeffs = np.sqrt(dt) * np.einsum("ij,bj->bi", sqrts[s], noise[:, s])
            g = g @ _so_exp_batch(n, coeffs) @ drift_steps[s]
            if jump_rate > 0:
                for i in range(count):
                    while jumpers[i] and jumpers[i][0] <= ts[s + 1]:
                        jumpers[i].pop(0)
                        pick = size_streams[i].choice(len(weights), p=weights)
                        g[i] = g[i] @ gtriple.pi_atoms[pick][0]
        out[start:start + count] = g
        del noise
    return out


# --- triple document ----------------------------------------------------------

TRIPLE_MAGIC = "# skewprod-triple v1"


def write_triple(triple: LevyTriple, fh) -> None:
    """Structured text document: drift table, covariance table, Levy
    histogram table with its bin geometry in the header."""
    close = False
    if isinstance(fh, str):
        fh = open(fh, "w", newline="")
        close = True
    try:
        b = triple.bins
        fh.write(TRIPLE_MAGIC + "\n")
        fh.write(f"[meta] space={triple.space} p={b.p} n_paths={triple.n_paths} "
                 f"threshold={triple.jump_threshold!r} box_limit={b.box_limit!r} "
                 f"boxes_per_axis={b.boxes_per_axis}\n")
        fh.write("[grid] " + " ".join(repr(float(t)) for t in triple.grid) + "\n")
        fh.write("[drift]\n")
        for t, row, se in zip(triple.grid, triple.drift_coords, triple.drift_se):
            fh.write(_num_row([t, *row, *se]))
        fh.write("[covariance]\n")
        for i, t in enumerate(triple.grid):
            flat = triple.covariance[i].ravel()
            se = triple.covariance_se[i].ravel()
            fh.write(_num_row([t, *flat, *se]))
        fh.write("[levy]\n")
        for i, t in enumerate(triple.grid):
            fh.write(_num_row([t, *triple.levy_hist[i], *triple.levy_se[i]]))
        fh.write(f"[fixed] count={len(triple.fixed_jumps)}\n")
        for t_fixed, sample in triple.fixed_jumps:
            fh.write(f"[fixed-jump] time={t_fixed!r} rows={len(sample)}\n")
            for row in np.asarray(sample):
                fh.write(_num_row(row))
    finally:
        if close:
            fh.close()


def _num_row(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values)) + "\n"


def read_triple(fh) -> LevyTriple:
    close = False
    if isinstance(fh, str):
        fh = open(fh, "r")
        close = True
    try:
        if fh.readline().strip() != TRIPLE_MAGIC:
            raise ValueError("not a skewprod triple document")
        meta_line = fh.readline().strip()
        meta = dict(kv.split("=", 1) for kv in meta_line.split()[1:])
        p = int(meta["p"])
        bins = BinGeometry(p, float(meta["box_limit"]),
                           int(meta["boxes_per_axis"]), float(meta["threshold"]))
        grid = np.array([float(v) for v in fh.readline().split()[1:]])
        m1 = len(grid)
        assert fh.readline().strip() == "[drift]"
        drift = np.empty((m1, p))
        drift_se = np.empty((m1, p))
        for i in range(m1):
            row = [float(v) for v in fh.readline().split()]
            drift[i] = row[1:1 + p]
            drift_se[i] = row[1 + p:1 + 2 * p]
        assert fh.readline().strip() == "[covariance]"
        cov = np.empty((m1, p, p))
        cov_se = np.empty((m1, p, p))
        for i in range(m1):
            row = [float(v) for v in fh.readline().split()]
            cov[i] = np.array(row[1:1 + p * p]).reshape(p, p)
            cov_se[i] = np.array(row[1 + p * p:1 + 2 * p * p]).reshape(p, p)
        assert fh.readline().strip() == "[levy]"
        nb = bins.n_bins
        hist = np.empty((m1, nb))
        hist_se = np.empty((m1, nb))
        for i in range(m1):
            row = [float(v) for v in fh.readline().split()]
            hist[i] = row[1:1 + nb]
            hist_se[i] = row[1 + nb:1 + 2 * nb]
        fixed_header = fh.readline().split()
        n_fixed = int(fixed_header[1].split("=")[1])
        fixed = []
        for _ in range(n_fixed):
            head = fh.readline().split()
            t_fixed = float(head[1].split("=")[1])
            rows = int(head[2].split("=")[1])
            sample = np.array([[float(v) for v in fh.readline().split()]
                               for _ in range(rows)])
            fixed.append((t_fixed, sample))
        return LevyTriple(grid, drift, cov, cov_se, bins, hist, hist_se,
                          drift_se, fixed, int(meta["n_paths"]),
                          float(meta["threshold"]), meta["space"])
    finally:
        if close:
            fh.close()


def _interp_group(mats: np.ndarray, grid: np.ndarray, t: float) -> np.ndarray:
    """Geodesic interpolation of a group-valued path at time t."""
    c = int(np.clip(np.searchsorted(grid, t) - 1, 0, len(grid) - 2))
    w = (t - grid[c]) / max(grid[c + 1] - grid[c], 1e-300)
    if w <= 0:
        return mats[c]
    if w >= 1:
        return mats[c + 1]
    rel = mats[c].T @ mats[c + 1]
    if np.linalg.norm(rel - np.eye(rel.shape[0])) < 1e-14:
        return mats[c]
    return mats[c] @ linalg.expm(w * linalg.logm(rel))
