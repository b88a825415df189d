"""Stratonovich integration of the invariant diffusions.

The coupled radial/frame system advances the transversal coordinates by a
Heun step and the frame by group-exponential (Lie-Euler) steps, so frame
paths stay on SO(n) by construction.  The frame step splits the angular
noise from the mixed-drift part, k <- k exp(X) exp(Y); replaying the same
noise through the u/a factorization then reproduces k = u a exactly (up to
roundoff), which is the discrete image of the continuous-time equivalence
between the two systems.
"""

from __future__ import annotations

import numpy as np

from . import linalg, rng as rngmod
from .cosets import CosetPoint
from .paths import CadlagPath, TimeChange
from .scenarios import RadialPoint, ScenarioGeometry, sphere_step

MAX_HALVINGS = 8


class IntegrationError(RuntimeError):
    pass


def _validate_grid(T: float, dt: float):
    if dt > 1e-2 + 1e-15:
        raise ValueError("dt must be at most 1e-2")
    if T < 0 or (dt > 0 and T / dt > 1e7):
        raise ValueError("T/dt exceeds the supported grid size")


def n_steps(T: float, dt: float) -> int:
    return int(round(T / dt)) if T > 0 else 0


# --- ambient simulation ------------------------------------------------------

def simulate_invariant_diffusion(geometry: ScenarioGeometry, x0, T: float,
                                 dt: float, master_seed: int,
                                 path_index: int = 0) -> CadlagPath:
    """Single path of the scenario's canonical invariant diffusion."""
    _validate_grid(T, dt)
    x0 = np.asarray(x0, dtype=float)
    if not geometry.in_interior(x0):
        raise ValueError("x0 must lie in the interior orbit set")
    steps = n_steps(T, dt)
    g = rngmod.stream(master_seed, path_index, rngmod.DIFFUSION)
    noise = g.standard_normal((steps, geometry.noise_dim))
    out = np.empty((steps + 1, len(x0)))
    out[0] = x0
    x = x0[None, :]
    for k in range(steps):
        x = geometry.ambient_step(x, dt, noise[k][None, :])
        out[k + 1] = x[0]
    times = np.arange(steps + 1) * dt
    return CadlagPath(times, out, kind=f"ambient:{geometry.name}",
                      seed=(master_seed, path_index))


def ambient_ensemble(geometry: ScenarioGeometry, x0, T: float, dt: float,
                     n_paths: int, master_seed: int, record_times=None,
                     block: int = 2000) -> np.ndarray:
    """Ensemble of ambient paths recorded at selected times.

    Returns an array of shape (n_paths, len(record_times), dim); the default
    records only the endpoint.  Path i draws from stream(master_seed, i), so
    the result is independent of the block size.
    """
    _validate_grid(T, dt)
    x0 = np.asarray(x0, dtype=float)
    steps = n_steps(T, dt)
    if record_times is None:
        record_times = [T]
    rec_idx = np.asarray([int(round(t / dt)) for t in record_times])
    out = np.empty((n_paths, len(rec_idx), len(x0)))
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count,
                                     (steps, geometry.noise_dim))
        x = np.broadcast_to(x0, (count, len(x0))).copy()
        if 0 in rec_idx:
            out[start:start + count, np.where(rec_idx == 0)[0][0]] = x
        for k in range(steps):
            x = geometry.ambient_step(x, dt, noise[:, k])
            where = np.where(rec_idx == k + 1)[0]
            if len(where):
                out[start:start + count, where[0]] = x
        del noise
    return out


# --- radial SDE --------------------------------------------------------------

def radial_heun_step(geometry: ScenarioGeometry, y: np.ndarray, dt: float,
                     dw: np.ndarray) -> np.ndarray:
    """One Heun (predictor-corrector on the drift) step of the radial SDE,
    batched over the leading axis."""
    sig = geometry.radial_sigma(y)
    b0 = geometry.radial_drift(y)
    pred = y + sig * dw + b0 * dt
    b1 = geometry.radial_drift(pred)
    return y + sig * dw + 0.5 * (b0 + b1) * dt


def simulate_radial_sde(geometry: ScenarioGeometry, y0, T: float, dt: float,
                        master_seed: int, path_index: int = 0,
                        truncate_on_exit: bool = True) -> CadlagPath:
    """Single radial path with internal step halving near the boundary."""
    _validate_grid(T, dt)
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    steps = n_steps(T, dt)
    g = rngmod.stream(master_seed, path_index, rngmod.DIFFUSION)
    out = np.empty((steps + 1, len(y0)))
    out[0] = y0
    y = y0.copy()
    exit_index = None
    for k in range(steps):
        y_new = _radial_step_halving(geometry, y, dt, g)
        if y_new is None:
            if truncate_on_exit:
                exit_index = k + 1
                out = out[: k + 1]
                break
            raise IntegrationError(
                "radial step kept leaving the interior after halving; "
                "reduce dt or move the start away from the boundary")
        y = y_new
        out[k + 1] = y
    times = np.arange(len(out)) * dt
    return CadlagPath(times, out, kind=f"radial:{geometry.name}",
                      seed=(master_seed, path_index), exit_index=exit_index)


def _radial_step_halving(geometry, y, dt, g):
    sub = 1
    for _ in range(MAX_HALVINGS + 1):
        h = dt / sub
        yy = y.copy()
        ok = True
        for _ in range(sub):
            dw = np.sqrt(h) * g.standard_normal(len(y))
            yy = radial_heun_step(geometry, yy[None, :], h, dw[None, :])[0]
            if not geometry.radial_interior(RadialPoint(yy, geometry.name)):
                ok = False
                break
        if ok:
            return yy
        sub *= 2
    return None


# --- coupled radial/frame system ---------------------------------------------

def _so_exp_batch(n: int, coeffs: np.ndarray) -> np.ndarray:
    """exp of sum_j coeffs_j xi_j over the so(n) basis order, batched."""
    if n == 2:
        return linalg.rot2(coeffs[..., 0])
    if n == 3:
        v = np.stack([coeffs[..., 2], -coeffs[..., 1], coeffs[..., 0]], axis=-1)
        return linalg.rot3_exp(v)
    from .groups import so_basis
    basis = np.stack(so_basis(n))
    mats = np.einsum("...k,kij->...ij", coeffs, basis)
    flat = mats.reshape(-1, n, n)
    out = np.empty_like(flat)
    for i in range(flat.shape[0]):
        out[i] = linalg.expm(flat[i])
    return out.reshape(mats.shape)


def integrate_coupled_yk(geometry: ScenarioGeometry, y0, T: float, dt: float,
                         master_seed: int, path_index: int = 0):
    """Joint radial/frame integration; returns (radial path, frame path).

    The frame step is k <- k exp(X) exp(Y) with X the angular-noise algebra
    increment (coefficients sigma(y)^T dB through the complement basis) and
    Y the mixed-drift increment from the eta/xi0 hooks (zero for all
    built-in scenarios).
    """
    _validate_grid(T, dt)
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if not geometry.radial_interior(RadialPoint(y0, geometry.name)):
        raise ValueError("y0 must be interior")
    steps = n_steps(T, dt)
    q, p, n = geometry.q, geometry.p, geometry.group_n
    g = rngmod.stream(master_seed, path_index, rngmod.DIFFUSION)
    noise = g.standard_normal((steps, q + p))
    y_out = np.empty((steps + 1, q))
    k_out = np.empty((steps + 1, n, n))
    y_out[0] = y0
    k_out[0] = np.eye(n)
    y = y0.copy()
    k = np.eye(n)
    exit_index = None
    full_dim = n * (n - 1) // 2
    pidx = _p_indices(geometry)
    for s in range(steps):
        dw = np.sqrt(dt) * noise[s]
        yp = RadialPoint(y, geometry.name)
        sig = _a_sqrt(geometry, yp)
        c_p = sig.T @ dw[q:]
        coeffs = np.zeros(full_dim)
        for idx, j in enumerate(pidx):
            coeffs[j] = c_p[idx]
        k = k @ _so_exp_batch(n, coeffs[None])[0]
        y_drift = _mixed_drift_exp(geometry, y, dw[:q], dt)
        if y_drift is not None:
            k = k @ y_drift
        y_new = radial_heun_step(geometry, y[None, :], dt, dw[None, :q])[0]
        if not geometry.radial_interior(RadialPoint(y_new, geometry.name)):
            exit_index = s + 1
            y_out = y_out[: s + 1]
            k_out = k_out[: s + 1]
            break
        y = y_new
        y_out[s + 1] = y
        k_out[s + 1] = k
    times = np.arange(len(y_out)) * dt
    rad = CadlagPath(times, y_out, kind=f"radial:{geometry.name}",
                     seed=(master_seed, path_index), exit_index=exit_index)
    frame = CadlagPath(times, k_out, kind=f"group:SO({n})",
                       seed=(master_seed, path_index), exit_index=exit_index)
    return rad, frame


def _p_indices(geometry: ScenarioGeometry) -> list[int]:
    """Positions of the complement basis inside the full so(n) basis order."""
    from .groups import so_basis
    full = so_basis(geometry.group_n)
    out = []
    for b in geometry.coset.basis_p:
        for i, fb in enumerate(full):
            if np.array_equal(b, fb):
                out.append(i)
                break
    return out


def _a_sqrt(geometry: ScenarioGeometry, yp) -> np.ndarray:
    """Symmetric square root of the angular coefficient matrix a(y)."""
    a = geometry.a_matrix(yp)
    if np.allclose(a, np.diag(np.diag(a))):
        return np.diag(np.sqrt(np.diag(a)))
    w, v = linalg.jacobi_eigh(a)
    w = np.clip(w, 0.0, None)
    return v @ np.diag(np.sqrt(w)) @ v.T


def _mixed_drift_exp(geometry: ScenarioGeometry, y, dwq, dt):
    """exp(Y) for the mixed-drift part; None when the hooks are absent."""
    if geometry.eta_hat is None and geometry.xi0_hat is None:
        return None
    n = geometry.group_n
    m = np.zeros((n, n))
    if geometry.eta_hat is not None:
        etas = geometry.eta_hat(y)
        for i in range(geometry.q):
            m = m + etas[i] * dwq[i]
    if geometry.xi0_hat is not None:
        m = m + geometry.xi0_hat(y) * dt
    return linalg.expm(m)


def factorize_ua(geometry: ScenarioGeometry, radial: CadlagPath,
                 frame: CadlagPath, tol: float = 1e-6):
    """Replay the frame path's noise through the u/a split system.

    Returns (u path, a path); raises IntegrationError if the reconstruction
    u_t a_t drifts from k_t beyond tol (advice: smaller dt).
    """
    master_seed, path_index = frame.seed
    steps = len(frame) - 1
    q, p, n = geometry.q, geometry.p, geometry.group_n
    dt = float(frame.times[1] - frame.times[0])
    g = rngmod.stream(master_seed, path_index, rngmod.DIFFUSION)
    noise = g.standard_normal((steps, q + p))
    u_out = np.empty_like(frame.points)
    a_out = np.empty_like(frame.points)
    u = np.eye(n)
    a = np.eye(n)
    u_out[0] = u
    a_out[0] = a
    full_dim = n * (n - 1) // 2
    pidx = _p_indices(geometry)
    worst = 0.0
    for s in range(steps):
        dw = np.sqrt(dt) * noise[s]
        y = radial.points[s]
        yp = RadialPoint(y, geometry.name)
        sig = _a_sqrt(geometry, yp)
        c_p = sig.T @ dw[q:]
        coeffs = np.zeros(full_dim)
        for idx, j in enumerate(pidx):
            coeffs[j] = c_p[idx]
        x_mat = _so_exp_batch(n, coeffs[None])[0]
        u = u @ (a @ x_mat @ a.T)
        y_drift = _mixed_drift_exp(geometry, y, dw[:q], dt)
        if y_drift is not None:
            a = a @ y_drift
        u_out[s + 1] = u
        a_out[s + 1] = a
        worst = max(worst, float(np.linalg.norm(u @ a - frame.points[s + 1])))
    if worst > tol:
        raise IntegrationError(
            f"u.a reconstruction drift {worst:.3g} exceeds {tol:.1g}; "
            "reduce dt")
    u_path = CadlagPath(frame.times, u_out, kind=frame.kind, seed=frame.seed,
                        exit_index=frame.exit_index)
    a_path = CadlagPath(frame.times, a_out, kind=frame.kind, seed=frame.seed,
                        exit_index=frame.exit_index)
    return u_path, a_path


def coupled_yk_endpoints(geometry: ScenarioGeometry, y0, T: float, dt: float,
                         n_paths: int, master_seed: int, block: int = 2000):
    """Batched endpoints of the coupled radial/frame system.

    Uses the diagonal form of sqrt(a(y)) shared by every built-in scenario.
    Returns (y at T (B, q), frames at T (B, n, n), alive mask); paths whose
    radial part leaves the interior are frozen and flagged dead.
    """
    _validate_grid(T, dt)
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    steps = n_steps(T, dt)
    q, p, n = geometry.q, geometry.p, geometry.group_n
    pidx = _p_indices(geometry)
    full_dim = n * (n - 1) // 2
    y_out = np.empty((n_paths, q))
    k_out = np.empty((n_paths, n, n))
    alive_out = np.empty(n_paths, dtype=bool)
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, q + p))
        y = np.broadcast_to(y0, (count, q)).copy()
        k = np.broadcast_to(np.eye(n), (count, n, n)).copy()
        alive = np.ones(count, dtype=bool)
        for s in range(steps):
            dw = np.sqrt(dt) * noise[:, s]
            sig = geometry.a_sqrt_diag(y)
            coeffs = np.zeros((count, full_dim))
            coeffs[:, pidx] = sig * dw[:, q:]
            coeffs[~alive] = 0.0
            k = k @ _so_exp_batch(n, coeffs)
            y_new = radial_heun_step(geometry, y, dt, dw[:, :q])
            ok = geometry.interior_mask(y_new)
            y = np.where((alive & ok)[:, None], y_new, y)
            alive &= ok
        y_out[start:start + count] = y
        k_out[start:start + count] = k
        alive_out[start:start + count] = alive
        del noise
    return y_out, k_out, alive_out


# --- time change -------------------------------------------------------------

def compute_time_change(radial: CadlagPath, geometry: ScenarioGeometry) -> TimeChange:
    """Trapezoidal integral of the scalar angular rate along a radial path.

    Only defined when K/M is irreducible (a(y) = alpha(y) I); other
    geometries need the full matrix covariance estimate.
    """
    if not geometry.irreducible:
        raise ValueError(
            f"{geometry.name}: angular space is not irreducible; "
            "estimate the full matrix A(t) instead of a scalar clock")
    vals = geometry.alpha(radial.points[:, 0] if radial.points.ndim > 1
                          else radial.points)
    dts = np.diff(radial.times)
    inc = 0.5 * (vals[1:] + vals[:-1]) * dts
    return TimeChange(radial.times, np.concatenate([[0.0], np.cumsum(inc)]))


def time_change_values(alpha_vals: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoid of precomputed alpha values on a uniform grid,
    batched over the leading axis."""
    inc = 0.5 * (alpha_vals[..., 1:] + alpha_vals[..., :-1]) * dt
    out = np.concatenate([np.zeros(alpha_vals.shape[:-1] + (1,)),
                          np.cumsum(inc, axis=-1)], axis=-1)
    return out


# --- sphere and group Brownian motion ----------------------------------------

def sample_sphere_bm(dim: int, z0, T: float, dt: float, master_seed: int,
                     path_index: int = 0) -> CadlagPath:
    """Brownian motion on S^dim (generator = Laplace-Beltrami/2), one path."""
    _validate_grid(T, dt)
    z0 = np.asarray(z0, dtype=float)
    if abs(np.linalg.norm(z0) - 1.0) > 1e-10:
        raise ValueError("z0 must be a unit vector")
    steps = n_steps(T, dt)
    g = rngmod.stream(master_seed, path_index, rngmod.DIFFUSION)
    noise = g.standard_normal((steps, dim + 1))
    out = np.empty((steps + 1, dim + 1))
    out[0] = z0
    z = z0[None, :]
    for k in range(steps):
        z = sphere_step(z, dt, noise[k][None, :])
        out[k + 1] = z[0]
    return CadlagPath(np.arange(steps + 1) * dt, out, kind=f"sphere:S{dim}",
                      seed=(master_seed, path_index))


def sphere_bm_ensemble(dim: int, z0, T: float, dt: float, n_paths: int,
                       master_seed: int, record_times=None,
                       block: int = 4000) -> np.ndarray:
    """Ensemble endpoints (or recorded grid) of Brownian motion on S^dim."""
    _validate_grid(T, dt)
    z0 = np.asarray(z0, dtype=float)
    steps = n_steps(T, dt)
    if record_times is None:
        record_times = [T]
    rec_idx = np.asarray([int(round(t / dt)) for t in record_times])
    out = np.empty((n_paths, len(rec_idx), dim + 1))
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, dim + 1))
        z = np.broadcast_to(z0, (count, dim + 1)).copy()
        if 0 in rec_idx:
            out[start:start + count, np.where(rec_idx == 0)[0][0]] = z
        for k in range(steps):
            z = sphere_step(z, dt, noise[:, k])
            where = np.where(rec_idx == k + 1)[0]
            if len(where):
                out[start:start + count, where[0]] = z
        del noise
    return out


def so3_bm_ensemble(T: float, dt: float, n_paths: int, master_seed: int,
                    record_stride: int = 1, diag_scale=(1.0, 1.0, 1.0),
                    block: int = 2500) -> np.ndarray:
    """Brownian motion on SO(3) (generator = half the sum of squared basis
    fields, optionally scaled per basis direction).

    Returns rotations at every record_stride-th grid point, shape
    (n_paths, n_recorded, 3, 3).
    """
    _validate_grid(T, dt)
    steps = n_steps(T, dt)
    rec = np.arange(0, steps + 1, record_stride)
    if rec[-1] != steps:
        rec = np.append(rec, steps)
    out = np.empty((n_paths, len(rec), 3, 3))
    scale = np.asarray(diag_scale, dtype=float)
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, 3))
        k = np.broadcast_to(np.eye(3), (count, 3, 3)).copy()
        out[start:start + count, 0] = k
        j = 1
        for s in range(steps):
            coeffs = np.sqrt(dt) * noise[:, s] * scale
            k = k @ _so_exp_batch(3, coeffs)
            if j < len(rec) and rec[j] == s + 1:
                out[start:start + count, j] = k
                j += 1
        del noise
    return out


def dyson_ensemble(n: int, lam0, T: float, dt: float, n_paths: int,
                   master_seed: int, block: int = 4000) -> np.ndarray:
    """Endpoints of the eigenvalue SDE d lam_i = sqrt(2) dB_i +
    sum_{j != i} dt / (lam_i - lam_j), the radial part of the invariant
    symmetric-matrix Brownian motion.

    Euler-Maruyama; the repulsive drift keeps gaps open, and the rare
    numerically crossed pair is restored by re-sorting (a label swap, not a
    distributional change).
    """
    _validate_grid(T, dt)
    lam0 = np.sort(np.asarray(lam0, dtype=float))[::-1]
    steps = n_steps(T, dt)
    out = np.empty((n_paths, n))
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, n))
        lam = np.broadcast_to(lam0, (count, n)).copy()
        idx = np.arange(n)
        for s in range(steps):
            diff = lam[:, :, None] - lam[:, None, :]
            diff[:, idx, idx] = np.inf
            drift = np.sum(1.0 / diff, axis=-1)
            lam = lam + np.sqrt(2.0 * dt) * noise[:, s] + drift * dt
            lam = -np.sort(-lam, axis=1)
        out[start:start + count] = lam
        del noise
    return out


# --- conditioned angular replay ----------------------------------------------

def replay_angular_given_radial(geometry: ScenarioGeometry,
                                radial_values: np.ndarray, dt: float,
                                n_paths: int, master_seed: int,
                                jump_measure=None, record_stride: int = 1,
                                block: int = 4000):
    """Re-simulate the conditioned angular process against one stored radial
    path, many times.

    The coupled construction separates the radial noise from the angular
    noise, so conditioning on the radial path means holding it fixed and
    redrawing only the angular drivers (plus jumps, when a jump measure is
    supplied; jumps must act through K, which leaves the radial path
    untouched).  Requires an irreducible angular space so the diffusion part
    is the alpha(y)-clocked sphere motion.

    Returns (recorded angular states (n_paths, n_rec, model_dim), recorded
    grid indices, jump log: list over paths of (time, coord-vector) pairs).
    """
    from .cosets import SphereCoset
    if not geometry.irreducible or not isinstance(geometry.coset, SphereCoset):
        raise ValueError("angular replay requires an irreducible sphere-model "
                         "angular space")
    radial_values = np.asarray(radial_values, dtype=float)
    if radial_values.ndim > 1:
        radial_values = radial_values[:, 0]
    alpha = geometry.alpha(radial_values)
    steps = len(radial_values) - 1
    rec = np.arange(0, steps + 1, record_stride)
    if rec[-1] != steps:
        rec = np.append(rec, steps)
    coset = geometry.coset
    d = coset.group_n
    z0 = coset.origin().value
    out = np.empty((n_paths, len(rec), d))
    jump_log = [[] for _ in range(n_paths)]
    T = steps * dt
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, d))
        jump_steps = [{} for _ in range(count)]
        if jump_measure is not None:
            for i in range(count):
                gj = rngmod.stream(master_seed, start + i, rngmod.JUMP_TIMES)
                gs = rngmod.stream(master_seed, start + i, rngmod.JUMP_SIZES)
                for tau in poisson_times(jump_measure.total_mass, T, gj):
                    k_idx = min(int(np.floor(tau / dt)), steps - 1)
                    jump_steps[i].setdefault(k_idx, []).append(
                        (tau, jump_measure.sampler(gs)))
        z = np.broadcast_to(z0, (count, d)).copy()
        out[start:start + count, 0] = z
        j = 1
        for s in range(steps):
            # diffusion with the stored local rate, then any jumps in (s, s+1]
            z = sphere_step(z, alpha[s] * dt, noise[:, s])
            pending = [i for i in range(count) if s in jump_steps[i]]
            for i in pending:
                for tau, sigma in jump_steps[i][s]:
                    zi = CosetPoint(z[i] / np.linalg.norm(z[i]), coset.space)
                    sec = coset.section(zi).matrix
                    z_new = coset.project_group(sec @ sigma.matrix)
                    inc = coset.increment(zi, z_new)
                    jump_log[start + i].append((tau, coset.coords(inc)
                                                if _inside_chart(coset, inc)
                                                else None))
                    z[i] = z_new.value
            if j < len(rec) and rec[j] == s + 1:
                out[start:start + count, j] = z
                j += 1
        del noise
    return out, rec, jump_log


def _inside_chart(coset, z) -> bool:
    _, ok = coset.coords_batch(z.value[None])
    return bool(ok[0])


def poisson_times(lam: float, T: float, g: np.random.Generator) -> list[float]:
    """Arrival times of a rate-lam Poisson process on (0, T]."""
    if lam <= 0 or T <= 0:
        return []
    out = []
    t = g.exponential(1.0 / lam)
    while t <= T:
        out.append(t)
        t += g.exponential(1.0 / lam)
    return out


# --- the ray counterexample, ensemble form -----------------------------------

def ray_bessel_ensemble(T: float, dt: float, n_paths: int, master_seed: int,
                        n: int = 3, qv_window=(0.5, 1.0), block: int = 4000):
    """Vectorized ray process started at the origin.

    The radius rides an auxiliary n-dimensional Brownian motion (its norm is
    a Bessel(n) path in law, with no Euler drift bias near the origin); the
    direction is uniform and redrawn only if the radius returns to zero
    exactly, so between such events the angular displacement is zero by
    construction, not merely small.

    Returns (radii at T, angular quadratic variation over qv_window,
    direction-reset counts inside qv_window).
    """
    _validate_grid(T, dt)
    steps = n_steps(T, dt)
    w0, w1 = (int(round(w / dt)) for w in qv_window)
    radii = np.empty(n_paths)
    qv = np.zeros(n_paths)
    resets = np.zeros(n_paths, dtype=int)
    for start in range(0, n_paths, block):
        count = min(block, n_paths - start)
        noise = rngmod.block_normals(master_seed, start, count, (steps, n))
        dir_noise = rngmod.block_normals(master_seed, start, count, (n,),
                                         purpose=rngmod.AUX)
        direction = dir_noise / np.linalg.norm(dir_noise, axis=1, keepdims=True)
        w = np.zeros((count, n))
        for s in range(steps):
            w = w + np.sqrt(dt) * noise[:, s]
            r = np.linalg.norm(w, axis=1)
            hit = r == 0.0
            if np.any(hit):
                fresh = noise[hit, s]
                new_dir = fresh / np.linalg.norm(fresh, axis=1, keepdims=True)
                if w0 <= s < w1:
                    ang = np.arccos(np.clip(
                        np.sum(new_dir * direction[hit], axis=1), -1.0, 1.0))
                    view_q = qv[start:start + count]
                    view_r = resets[start:start + count]
                    view_q[hit] += ang ** 2
                    view_r[hit] += 1
                direction[hit] = new_dir
        radii[start:start + count] = np.linalg.norm(w, axis=1)
        del noise
    return radii, qv, resets
