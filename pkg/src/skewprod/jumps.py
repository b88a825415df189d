"""Jump interlacing: an invariant diffusion glued at Poisson times with
jumps drawn from a finite conjugation-invariant measure on the group,
plus generator and first-jump-decomposition checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .groups import GroupElement, haar_matrices, so_basis
from .linalg import expm
from .paths import CadlagPath
from .scenarios import ScenarioGeometry, fd_ambient_generator
from .sde import n_steps, poisson_times, _validate_grid


@dataclass
class JumpMeasure:
    """Finite measure on the acting group, given by total mass and sampler.

    The built-in families are all conjugation-invariant by construction:
    conjugation-averaged point masses, scaled Haar measure, and the
    exponential of an isotropic Gaussian algebra element.
    """
    total_mass: float
    sampler: object  # callable rng -> GroupElement
    family: str = "custom"
    params: dict = field(default_factory=dict)
    conjugate_invariant: bool = True

    def sample_batch(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.stack([self.sampler(rng).matrix for _ in range(count)])


def plane_rotation(n: int, angle: float) -> np.ndarray:
    m = np.eye(n)
    m[0, 0] = m[1, 1] = np.cos(angle)
    m[0, 1] = -np.sin(angle)
    m[1, 0] = np.sin(angle)
    return m


def conjugated_point_mass(group_n: int, angle: float, total_mass: float) -> JumpMeasure:
    """Point mass at a fixed-angle rotation, averaged over conjugation:
    sigma = k R0 k^-1 with k Haar."""
    r0 = plane_rotation(group_n, angle)

    def sampler(g: np.random.Generator) -> GroupElement:
        k = haar_matrices(group_n, g, 1)[0]
        return GroupElement(k @ r0 @ k.T)

    return JumpMeasure(total_mass, sampler, "point_mass",
                       {"angle": angle, "n": group_n})


def haar_jump_measure(group_n: int, total_mass: float) -> JumpMeasure:
    def sampler(g: np.random.Generator) -> GroupElement:
        return GroupElement(haar_matrices(group_n, g, 1)[0])

    return JumpMeasure(total_mass, sampler, "haar", {"n": group_n})


def gaussian_exp_measure(group_n: int, scale: float, total_mass: float) -> JumpMeasure:
    basis = so_basis(group_n)

    def sampler(g: np.random.Generator) -> GroupElement:
        coeffs = scale * g.standard_normal(len(basis))
        return GroupElement(expm(sum(c * b for c, b in zip(coeffs, basis))))

    return JumpMeasure(total_mass, sampler, "gaussian_exp",
                       {"scale": scale, "n": group_n})


def make_jump_measure(family: str, group_n: int, total_mass: float,
                      **params) -> JumpMeasure:
    if family == "point_mass":
        return conjugated_point_mass(group_n, params.get("angle", np.pi / 2),
                                     total_mass)
    if family == "haar":
        return haar_jump_measure(group_n, total_mass)
    if family == "gaussian_exp":
        return gaussian_exp_measure(group_n, params.get("scale", 0.5), total_mass)
    raise KeyError(f"unknown jump family {family!r}")


@dataclass
class JumpRecord:
    time: float
    element: np.ndarray
    pre_point: np.ndarray
    post_point: np.ndarray


def sample_jump_times(total_mass: float, T: float,
                      g: np.random.Generator) -> list[float]:
    """Partial sums of iid exponential waiting times, truncated at T."""
    if total_mass < 0:
        raise ValueError("jump rate must be nonnegative")
    return poisson_times(total_mass, T, g)


def interlace(geometry: ScenarioGeometry, eta: JumpMeasure, x0, T: float,
              dt: float, master_seed: int, path_index: int = 0) -> CadlagPath:
    """Diffusion segments glued at Poisson jump times.

    Jump times are inserted into the grid; at each one the left limit is
    recorded and the state moves by x -> sigma x.  With no jumps sampled the
    path coincides bit-for-bit with the pure diffusion at the same seed.
    """
    _validate_grid(T, dt)
    x0 = np.asarray(x0, dtype=float)
    steps = n_steps(T, dt)
    g_times = rngmod.stream(master_seed, path_index, rngmod.JUMP_TIMES)
    g_sizes = rngmod.stream(master_seed, path_index, rngmod.JUMP_SIZES)
    taus = sample_jump_times(eta.total_mass, T, g_times)
    # drop jump times indistinguishable from grid points to keep times strict
    base = np.arange(steps + 1) * dt
    taus = [t for t in taus if np.min(np.abs(base - t)) > 1e-12]
    times = np.sort(np.concatenate([base, np.asarray(taus)]))
    g_diff = rngmod.stream(master_seed, path_index, rngmod.DIFFUSION)
    noise = g_diff.standard_normal((len(times) - 1, geometry.noise_dim))
    tau_set = {float(t) for t in taus}
    points = np.empty((len(times), len(x0)))
    points[0] = x0
    marks = {}
    records = []
    x = x0[None, :]
    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        x = geometry.ambient_step(x, h, noise[i - 1][None, :])
        if float(times[i]) in tau_set:
            pre = x[0].copy()
            sigma = eta.sampler(g_sizes)
            x = geometry.act_ambient(sigma.matrix, x[0])[None, :]
            marks[i] = pre
            records.append(JumpRecord(float(times[i]), sigma.matrix, pre,
                                      x[0].copy()))
        points[i] = x[0]
    path = CadlagPath(times, points, kind=f"ambient:{geometry.name}",
                      jump_marks=marks, seed=(master_seed, path_index))
    path.jump_records = records
    return path


def interlaced_endpoint_ensemble(geometry: ScenarioGeometry, eta: JumpMeasure,
                                 x0, T: float, dt: float, n_paths: int,
                                 master_seed: int, index_offset: int = 0,
                                 first_jump_at=None, block: int = 2000) -> np.ndarray:
    """Endpoints of the interlaced process, jump times grid-aligned.

    ``first_jump_at`` optionally forces path i's first jump to the supplied
    time (an array over paths), with subsequent jumps Poisson as usual; that
    is the sampler behind the first-jump-decomposition check.
    """
    _validate_grid(T, dt)
    x0 = np.asarray(x0, dtype=float)
    steps = n_steps(T, dt)
    out = np.empty((n_paths, len(x0)))
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, index_offset + start, count,
                                     (steps, geometry.noise_dim))
        jump_map = [dict() for _ in range(count)]
        for i in range(count):
            gi = rngmod.stream(master_seed, index_offset + start + i,
                               rngmod.JUMP_TIMES)
            if first_jump_at is None:
                taus = sample_jump_times(eta.total_mass, T, gi)
            else:
                t0 = float(first_jump_at[start + i])
                taus = [t0] + [t0 + u for u in
                               sample_jump_times(eta.total_mass, T - t0, gi)]
            for tau in taus:
                k_idx = min(int(np.ceil(tau / dt)), steps)
                jump_map[i].setdefault(k_idx, 0)
                jump_map[i][k_idx] += 1
        sizes = [rngmod.stream(master_seed, index_offset + start + i,
                               rngmod.JUMP_SIZES) for i in range(count)]
        x = np.broadcast_to(x0, (count, len(x0))).copy()
        for k in range(steps):
            x = geometry.ambient_step(x, dt, noise[:, k])
            for i in range(count):
                reps = jump_map[i].get(k + 1, 0)
                for _ in range(reps):
                    sigma = eta.sampler(sizes[i])
                    x[i] = geometry.act_ambient(sigma.matrix, x[i])
        out[start:start + count] = x
        del noise
    return out


def apply_generator_L3(f, x, geometry: ScenarioGeometry, eta: JumpMeasure,
                       n_mc: int, master_seed: int = 0):
    """Generator of the interlaced process at x: the diffusion part by
    finite differences through the scenario's coefficient fields, the jump
    part by Monte Carlo over sigma ~ eta.

    Returns (value, standard error of the jump term).
    """
    x = np.asarray(x, dtype=float)
    diffusion_part = fd_ambient_generator(geometry, f, x)
    if eta is None or eta.total_mass == 0.0 or n_mc == 0:
        return diffusion_part, 0.0
    g = rngmod.stream(master_seed, 0, rngmod.JUMP_SIZES)
    fx = f(x)
    vals = np.empty(n_mc)
    for i in range(n_mc):
        sigma = eta.sampler(g)
        vals[i] = f(geometry.act_ambient(sigma.matrix, x)) - fx
    jump_part = eta.total_mass * float(np.mean(vals))
    se = eta.total_mass * float(np.std(vals, ddof=1)) / np.sqrt(n_mc) \
        if n_mc > 1 else 0.0
    return diffusion_part + jump_part, se


def verify_inteq(geometry: ScenarioGeometry, eta: JumpMeasure, x0, t: float,
                 f, n_paths: int, master_seed: int, dt: float = 1e-3):
    """Residual of the first-jump decomposition of the semigroup.

    The left side runs the interlaced process directly; the right side
    combines the no-jump branch with a forced first jump at a truncated-
    exponential time followed by an interlaced remainder.  Returns
    (residual, combined standard error).
    """
    if t > 0.5:
        raise ValueError("keep t <= 0.5: nested variance grows with t")
    lam = eta.total_mass
    x0 = np.asarray(x0, dtype=float)

    left_pts = interlaced_endpoint_ensemble(geometry, eta, x0, t, dt, n_paths,
                                            master_seed, index_offset=0)
    lv = np.array([f(p) for p in left_pts])
    left, left_se = float(np.mean(lv)), float(np.std(lv, ddof=1)) / np.sqrt(len(lv))

    from .sde import ambient_ensemble
    pure = ambient_ensemble(geometry, x0, t, dt, n_paths,
                            _offset_seed(master_seed, 1))[:, 0, :]
    pv = np.array([f(p) for p in pure])
    m0, m0_se = float(np.mean(pv)), float(np.std(pv, ddof=1)) / np.sqrt(len(pv))

    if lam == 0.0:
        right, right_se = m0, m0_se
    else:
        g_u = rngmod.stream(master_seed, 0, rngmod.AUX)
        v = g_u.uniform(size=n_paths)
        first = -np.log(1.0 - v * (1.0 - np.exp(-lam * t))) / lam
        branch = interlaced_endpoint_ensemble(
            geometry, eta, x0, t, dt, n_paths, _offset_seed(master_seed, 2),
            first_jump_at=first)
        bv = np.array([f(p) for p in branch])
        m1, m1_se = float(np.mean(bv)), float(np.std(bv, ddof=1)) / np.sqrt(len(bv))
        w = np.exp(-lam * t)
        right = w * m0 + (1.0 - w) * m1
        right_se = float(np.hypot(w * m0_se, (1.0 - w) * m1_se))
    residual = left - right
    se = float(np.hypot(left_se, right_se))
    return residual, se


def _offset_seed(master_seed: int, salt: int) -> int:
    return (int(master_seed) * 1000003 + salt) % (2 ** 63)
