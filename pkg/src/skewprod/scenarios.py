"""Concrete scenario geometries: the group action, the transversal, the
isotropy group, radial/angular projections, and generator coefficients.

Ambient points travel as coordinate vectors (symmetric matrices in a
diag-then-offdiag vech layout), so every scenario exposes the same
array-in, array-out surface to the SDE engine and the decomposer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import groups, linalg
from .cosets import (CosetGeometry, CosetPoint, RotationGroupCoset,
                     SignedFrameCoset, SphereCoset)


class BoundaryError(ValueError):
    """Point sits on the orbit boundary; treat as an exit-time event."""


@dataclass(frozen=True)
class RadialPoint:
    """Point of the open transversal Y° in its scenario chart."""
    coords: np.ndarray
    scenario: str

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "coords", c)
        c.setflags(write=False)


class ScenarioGeometry:
    """Base class; subclasses fill in the scenario-specific maps."""

    name: str
    dim_X: int
    q: int
    p: int
    group_n: int
    coset: CosetGeometry
    irreducible: bool = False
    boundary_eps: float = 1e-8

    # optional mixed-drift hooks of the coupled radial/frame system;
    # zero for every built-in scenario (no worked example fixes them)
    eta_hat = None
    xi0_hat = None

    # -- decomposition -------------------------------------------------
    def project_radial(self, x: np.ndarray) -> RadialPoint:
        raise NotImplementedError

    def project_angular(self, x: np.ndarray) -> CosetPoint:
        raise NotImplementedError

    def reconstruct(self, z: CosetPoint, y: RadialPoint) -> np.ndarray:
        raise NotImplementedError

    def act_ambient(self, k: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial_interior(self, y: RadialPoint) -> bool:
        return self.boundary_distance(y) > self.boundary_eps

    def boundary_distance(self, y: RadialPoint) -> float:
        raise NotImplementedError

    def in_interior(self, x: np.ndarray) -> bool:
        try:
            return self.radial_interior(self.project_radial(x))
        except BoundaryError:
            return False

    # -- generator data --------------------------------------------------
    def radial_sigma(self, y: np.ndarray) -> np.ndarray:
        """Diffusion coefficients of the radial SDE (diagonal, per coord)."""
        raise NotImplementedError

    def radial_drift(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def a_matrix(self, y: RadialPoint) -> np.ndarray:
        """Coefficient matrix of the purely angular second-order part."""
        raise NotImplementedError

    def alpha(self, y_coords: np.ndarray) -> np.ndarray:
        """Scalar with a_matrix = alpha * I; only for irreducible K/M."""
        raise NotImplementedError(
            f"{self.name}: K/M is not irreducible; use the full matrix A(t)")

    # -- ambient generator in chart coordinates (finite-difference checks) --
    def c_matrix(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def c_vector(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- batched coefficient fields (all built-in a(y) are diagonal) -------
    def a_sqrt_diag(self, y: np.ndarray) -> np.ndarray:
        """Diagonal of sqrt(a(y)) in the complement basis, batched (B, p)."""
        raise NotImplementedError

    def interior_mask(self, y: np.ndarray) -> np.ndarray:
        """Boolean interior test on a batch of radial coordinates (B, q)."""
        raise NotImplementedError

    # -- simulation -------------------------------------------------------
    noise_dim: int

    def ambient_step(self, x: np.ndarray, dt: float, noise: np.ndarray) -> np.ndarray:
        """One time step of the canonical invariant diffusion, batched over
        the leading axis of x."""
        raise NotImplementedError

    def default_x0(self) -> np.ndarray:
        raise NotImplementedError

    def random_interior(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class EuclidSON(ScenarioGeometry):
    """R^n under SO(n); transversal = positive first-axis ray."""

    def __init__(self, n: int):
        if not 2 <= n <= 6:
            raise ValueError("euclid_son supports n in 2..6")
        self.name = "euclid_son"
        self.group_n = n
        self.dim_X = n
        self.q = 1
        self.coset = SphereCoset(n)
        self.p = self.coset.p
        self.noise_dim = n
        self.irreducible = True

    def project_radial(self, x):
        r = float(np.linalg.norm(x))
        if r <= self.boundary_eps:
            raise BoundaryError("point at the origin has no radial chart")
        return RadialPoint(np.array([r]), self.name)

    def project_angular(self, x):
        r = np.linalg.norm(x)
        if r <= self.boundary_eps:
            raise BoundaryError("point at the origin has no angular part")
        return CosetPoint(np.asarray(x, dtype=float) / r, "sphere")

    def project_angular_batch(self, xs):
        r = np.linalg.norm(xs, axis=-1, keepdims=True)
        return xs / r

    def reconstruct(self, z, y):
        return float(y.coords[0]) * z.value

    def act_ambient(self, k, x):
        return np.asarray(k) @ np.asarray(x)

    def boundary_distance(self, y):
        return float(y.coords[0])

    def radial_sigma(self, y):
        return np.ones_like(y)

    def radial_drift(self, y):
        return (self.group_n - 1) / (2.0 * y)

    def a_matrix(self, y):
        return np.eye(self.p) / float(y.coords[0]) ** 2

    def alpha(self, y_coords):
        return 1.0 / np.asarray(y_coords, dtype=float) ** 2

    def a_sqrt_diag(self, y):
        return np.repeat(1.0 / y[:, :1], self.p, axis=1)

    def interior_mask(self, y):
        return y[:, 0] > self.boundary_eps

    def c_matrix(self, x):
        return np.eye(self.dim_X)

    def c_vector(self, x):
        return np.zeros(self.dim_X)

    def ambient_step(self, x, dt, noise):
        return x + np.sqrt(dt) * noise

    def default_x0(self):
        x = np.zeros(self.dim_X)
        x[0] = 1.0
        return x

    def random_interior(self, rng):
        v = rng.standard_normal(self.dim_X)
        return v / np.linalg.norm(v) * rng.uniform(0.5, 2.0)


def vech_index(n: int):
    """Two index arrays mapping vech coords (diag first, then i<j pairs in
    the so_basis pair order) to matrix positions."""
    rows = list(range(n))
    cols = list(range(n))
    for i in range(n - 1):
        for j in range(i + 1, n):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


class SymMatrices(ScenarioGeometry):
    """Symmetric n x n matrices under SO(n) conjugation; transversal =
    non-ascending diagonals; the radial part is Dyson's eigenvalue motion.

    The canonical diffusion is the invariant matrix Brownian motion with
    Var(x_ii) = 2t and Var(x_ij) = t off the diagonal; that normalization is
    what makes the eigenframe coefficients equal (lam_i - lam_j)^{-2}.
    """

    GAP_EPS = 1e-10

    def __init__(self, n: int):
        if not 2 <= n <= 6:
            raise ValueError("sym_matrices supports n in 2..6")
        self.name = "sym_matrices"
        self.group_n = n
        self.q = n
        self.dim_X = n * (n + 1) // 2
        self.coset = SignedFrameCoset(n)
        self.p = self.coset.p
        self.noise_dim = self.dim_X
        self.boundary_eps = self.GAP_EPS
        self._rows, self._cols = vech_index(n)
        self._scale = np.concatenate([np.full(n, np.sqrt(2.0)),
                                      np.ones(self.dim_X - n)])
        # eigenvalue-difference pair order matches the so_basis pair order
        self._pairs = [(i, j) for i in range(n - 1) for j in range(i + 1, n)]

    def to_matrix(self, v):
        v = np.asarray(v, dtype=float)
        m = np.zeros(v.shape[:-1] + (self.group_n, self.group_n))
        m[..., self._rows, self._cols] = v
        m[..., self._cols, self._rows] = v
        return m

    def to_vech(self, m):
        return np.asarray(m, dtype=float)[..., self._rows, self._cols]

    def _eigh(self, x):
        w, vec = linalg.jacobi_eigh(self.to_matrix(x))
        return w, vec

    def project_radial(self, x):
        w, _ = self._eigh(x)
        if np.min(w[:-1] - w[1:]) < self.GAP_EPS:
            raise BoundaryError("repeated eigenvalues: point on orbit boundary")
        return RadialPoint(w, self.name)

    def project_angular(self, x):
        w, vec = self._eigh(x)
        if np.min(w[:-1] - w[1:]) < self.GAP_EPS:
            raise BoundaryError("repeated eigenvalues: point on orbit boundary")
        return CosetPoint(self.coset.canonicalize(vec), "signed_frame")

    def reconstruct(self, z, y):
        qm = z.value
        return self.to_vech(qm @ np.diag(y.coords) @ qm.T)

    def act_ambient(self, k, x):
        k = np.asarray(k)
        return self.to_vech(k @ self.to_matrix(x) @ k.T)

    def boundary_distance(self, y):
        lam = y.coords
        return float(np.min(lam[:-1] - lam[1:]))

    def radial_sigma(self, y):
        return np.full_like(y, np.sqrt(2.0))

    def radial_drift(self, y):
        lam = np.asarray(y, dtype=float)
        diff = lam[..., :, None] - lam[..., None, :]
        idx = np.arange(lam.shape[-1])
        diff[..., idx, idx] = np.inf
        return np.sum(1.0 / diff, axis=-1)

    def a_matrix(self, y):
        lam = y.coords
        gaps = np.array([lam[i] - lam[j] for i, j in self._pairs])
        return np.diag(1.0 / gaps ** 2)

    def a_sqrt_diag(self, y):
        cols = [1.0 / (y[:, i] - y[:, j]) for i, j in self._pairs]
        return np.stack(cols, axis=1)

    def interior_mask(self, y):
        return np.min(y[:, :-1] - y[:, 1:], axis=1) > self.GAP_EPS

    def c_matrix(self, x):
        return np.diag(self._scale ** 2)

    def c_vector(self, x):
        return np.zeros(self.dim_X)

    def ambient_step(self, x, dt, noise):
        return x + np.sqrt(dt) * self._scale * noise

    def default_x0(self):
        lam = np.linspace(self.group_n - 1.0, -(self.group_n - 1.0), self.group_n)
        return self.to_vech(np.diag(lam))

    def random_interior(self, rng):
        lam = np.sort(rng.uniform(-2.0, 2.0, self.group_n))[::-1]
        while np.min(lam[:-1] - lam[1:]) < 0.2:
            lam = np.sort(rng.uniform(-2.0, 2.0, self.group_n))[::-1]
        k = groups.haar_matrices(self.group_n, rng, 1)[0]
        return self.to_vech(k @ np.diag(lam) @ k.T)


class SpherePolar(ScenarioGeometry):
    """S^n under the rotations fixing the polar axis; radial part = polar
    angle on the half great circle."""

    def __init__(self, n: int):
        if n not in (2, 3):
            raise ValueError("sphere_polar ships for S^2 and S^3")
        self.name = "sphere_polar"
        self.sphere_dim = n
        self.group_n = n  # K acts on the last n coordinates
        self.dim_X = n + 1
        self.q = 1
        self.coset = SphereCoset(n)
        self.p = self.coset.p
        self.noise_dim = n + 1
        self.irreducible = True

    def project_radial(self, x):
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        theta = float(np.arccos(np.clip(x[0] / nx, -1.0, 1.0)))
        if not self.boundary_eps < theta < np.pi - self.boundary_eps:
            raise BoundaryError("point at a pole has no angular part")
        return RadialPoint(np.array([theta]), self.name)

    def project_angular(self, x):
        x = np.asarray(x, dtype=float)
        w = x[1:]
        nw = np.linalg.norm(w)
        if nw <= self.boundary_eps:
            raise BoundaryError("point at a pole has no angular part")
        return CosetPoint(w / nw, "sphere")

    def reconstruct(self, z, y):
        theta = float(y.coords[0])
        out = np.empty(self.dim_X)
        out[0] = np.cos(theta)
        out[1:] = np.sin(theta) * z.value
        return out

    def act_ambient(self, k, x):
        out = np.array(x, dtype=float, copy=True)
        out[..., 1:] = np.einsum("ij,...j->...i", np.asarray(k), out[..., 1:])
        return out

    def boundary_distance(self, y):
        theta = float(y.coords[0])
        return min(theta, np.pi - theta)

    def radial_sigma(self, y):
        return np.ones_like(y)

    def radial_drift(self, y):
        return 0.5 * (self.sphere_dim - 1) / np.tan(y)

    def a_matrix(self, y):
        return np.eye(self.p) / np.sin(float(y.coords[0])) ** 2

    def alpha(self, y_coords):
        return 1.0 / np.sin(np.asarray(y_coords, dtype=float)) ** 2

    def a_sqrt_diag(self, y):
        return np.repeat(1.0 / np.sin(y[:, :1]), self.p, axis=1)

    def interior_mask(self, y):
        return (y[:, 0] > self.boundary_eps) & (y[:, 0] < np.pi - self.boundary_eps)

    def c_matrix(self, x):
        x = np.asarray(x, dtype=float)
        x = x / np.linalg.norm(x)
        return np.eye(self.dim_X) - np.outer(x, x)

    def c_vector(self, x):
        x = np.asarray(x, dtype=float)
        x = x / np.linalg.norm(x)
        return -0.5 * self.sphere_dim * x

    def ambient_step(self, x, dt, noise):
        return sphere_step(x, dt, noise)

    def default_x0(self):
        x = np.zeros(self.dim_X)
        x[1] = 1.0  # equator point over the coset origin
        return x

    def random_interior(self, rng):
        theta = rng.uniform(0.4, np.pi - 0.4)
        w = rng.standard_normal(self.sphere_dim)
        w /= np.linalg.norm(w)
        out = np.empty(self.dim_X)
        out[0] = np.cos(theta)
        out[1:] = np.sin(theta) * w
        return out


def sphere_step(x: np.ndarray, dt: float, noise: np.ndarray) -> np.ndarray:
    """Geodesic Brownian step on a unit sphere (generator = Laplacian/2).

    Tangential Gaussian increment followed by the exponential map; batched
    over leading axes.  Keeps the norm at 1 exactly.
    """
    x = np.asarray(x, dtype=float)
    g = np.sqrt(dt) * noise
    v = g - np.sum(g * x, axis=-1, keepdims=True) * x
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    small = nv < 1e-300
    direction = np.where(small, 0.0, v / np.where(small, 1.0, nv))
    out = np.cos(nv) * x + np.sin(nv) * direction
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


class ProductSpace(ScenarioGeometry):
    """Y x (K/M) with Y = R and K/M the circle; the smallest product case.

    Ambient coordinates: (y, u1, u2) with (u1, u2) on the unit circle.
    """

    def __init__(self):
        self.name = "product_space"
        self.group_n = 2
        self.dim_X = 3
        self.q = 1
        self.coset = RotationGroupCoset(2)
        self.p = 1
        self.noise_dim = 3
        self.irreducible = True

    def _angle_matrix(self, u):
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u)
        return np.array([[u[0], -u[1]], [u[1], u[0]]])

    def project_radial(self, x):
        return RadialPoint(np.array([float(x[0])]), self.name)

    def project_angular(self, x):
        return CosetPoint(self._angle_matrix(np.asarray(x)[1:]), "group")

    def reconstruct(self, z, y):
        return np.array([float(y.coords[0]), z.value[0, 0], z.value[1, 0]])

    def act_ambient(self, k, x):
        out = np.array(x, dtype=float, copy=True)
        out[..., 1:] = np.einsum("ij,...j->...i", np.asarray(k), out[..., 1:])
        return out

    def boundary_distance(self, y):
        return np.inf

    def radial_interior(self, y):
        return True

    def radial_sigma(self, y):
        return np.ones_like(y)

    def radial_drift(self, y):
        return np.zeros_like(y)

    def a_matrix(self, y):
        return np.eye(1)

    def alpha(self, y_coords):
        return np.ones_like(np.asarray(y_coords, dtype=float))

    def a_sqrt_diag(self, y):
        return np.ones((y.shape[0], 1))

    def interior_mask(self, y):
        return np.ones(y.shape[0], dtype=bool)

    def c_matrix(self, x):
        x = np.asarray(x, dtype=float)
        u = x[1:] / np.linalg.norm(x[1:])
        out = np.zeros((3, 3))
        out[0, 0] = 1.0
        out[1:, 1:] = np.eye(2) - np.outer(u, u)
        return out

    def c_vector(self, x):
        x = np.asarray(x, dtype=float)
        u = x[1:] / np.linalg.norm(x[1:])
        return np.concatenate([[0.0], -0.5 * u])

    def ambient_step(self, x, dt, noise):
        out = np.array(x, dtype=float, copy=True)
        out[..., 0] += np.sqrt(dt) * noise[..., 0]
        out[..., 1:] = sphere_step(out[..., 1:], dt, noise[..., 1:])
        return out

    def default_x0(self):
        return np.array([0.0, 1.0, 0.0])

    def random_interior(self, rng):
        ang = rng.uniform(-np.pi, np.pi)
        return np.array([rng.normal(), np.cos(ang), np.sin(ang)])


# --- the section-2 counterexample: ray process with Bessel radius ----------

@dataclass
class RayState:
    direction: np.ndarray | None
    radius: float


def counterexample_step(state: RayState, dt: float, rng: np.random.Generator,
                        n: int = 3) -> RayState:
    """One Euler step of the ray-Bessel process.

    From the origin the process picks a uniform ray and runs Bessel(n)
    motion along it; the direction changes only when the radius returns
    to zero.  Angular quadratic variation is exactly zero in between.
    """
    if dt == 0.0:
        return state
    direction, r = state.direction, state.radius
    if direction is None or r <= 0.0:
        v = rng.standard_normal(n)
        direction = v / np.linalg.norm(v)
    if r <= 1e-12:
        # exact Bessel start from the origin: |N(0, dt I_n)|
        r_new = float(np.sqrt(dt) * np.linalg.norm(rng.standard_normal(n)))
    else:
        r_new = r + float(np.sqrt(dt) * rng.standard_normal()) \
            + (n - 1) / (2.0 * r) * dt
        if r_new <= 0.0:
            r_new = abs(r_new)
            v = rng.standard_normal(n)
            direction = v / np.linalg.norm(v)
    return RayState(direction, r_new)


# --- registry ---------------------------------------------------------------

def make_scenario(name: str, n: int | None = None) -> ScenarioGeometry:
    """Build a scenario geometry by name; n selects the size where relevant."""
    if name == "euclid_son":
        return EuclidSON(3 if n is None else n)
    if name == "sym_matrices":
        return SymMatrices(2 if n is None else n)
    if name == "sphere_polar":
        return SpherePolar(2 if n is None else n)
    if name == "product_space":
        return ProductSpace()
    raise KeyError(f"unknown scenario {name!r}; choose from "
                   "euclid_son, sym_matrices, sphere_polar, product_space")


SCENARIO_NAMES = ("euclid_son", "sym_matrices", "sphere_polar", "product_space")


# --- finite-difference generator checks -------------------------------------

def fd_ambient_generator(geom: ScenarioGeometry, func, x: np.ndarray,
                         h: float = 1e-4) -> float:
    """Apply the ambient generator to func at x by central differences,
    using the scenario's c_ij / c_i coefficient fields."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    c = geom.c_matrix(x)
    cv = geom.c_vector(x)
    f0 = func(x)
    out = 0.0
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        fp = func(x + ei)
        fm = func(x - ei)
        out += 0.5 * c[i, i] * (fp - 2.0 * f0 + fm) / h ** 2
        out += cv[i] * (fp - fm) / (2.0 * h)
        for j in range(i + 1, d):
            if c[i, j] == 0.0 and c[j, i] == 0.0:
                continue
            ej = np.zeros(d)
            ej[j] = h
            mixed = (func(x + ei + ej) - func(x + ei - ej)
                     - func(x - ei + ej) + func(x - ei - ej)) / (4.0 * h ** 2)
            out += 0.5 * (c[i, j] + c[j, i]) * mixed
    return out


def fd_radial_generator(geom: ScenarioGeometry, f, y: np.ndarray,
                        h: float = 1e-4) -> float:
    """Radial generator (1/2) sigma^2 f'' + drift f' by central differences."""
    y = np.asarray(y, dtype=float)
    sig = geom.radial_sigma(y)
    drift = geom.radial_drift(y)
    out = 0.0
    for i in range(len(y)):
        ei = np.zeros(len(y))
        ei[i] = h
        out += 0.5 * sig[i] ** 2 * (f(y + ei) - 2.0 * f(y) + f(y - ei)) / h ** 2
        out += drift[i] * (f(y + ei) - f(y - ei)) / (2.0 * h)
    return out


def lie_second_derivative(coset: CosetGeometry, g, z: CosetPoint,
                          i: int, j: int, h: float = 1e-3) -> float:
    """xi_i xi_j g(z) through the section-based chart, by a 4-point stencil."""
    s = coset.section(z).matrix
    o = coset.origin()

    def at(ti, tj):
        ei = linalg.expm(ti * coset.basis_p[i])
        ej = linalg.expm(tj * coset.basis_p[j])
        return g(coset.act(s @ ei @ ej, o))

    return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h ** 2)


def fd_angular_covariance(geom: ScenarioGeometry, g, z: CosetPoint,
                          y: RadialPoint, h: float = 1e-3) -> float:
    """The purely angular generator part (1/2) sum a_ij xi_i xi_j g(z)."""
    a = geom.a_matrix(y)
    out = 0.0
    for i in range(geom.p):
        for j in range(geom.p):
            if a[i, j] == 0.0:
                continue
            out += 0.5 * a[i, j] * lie_second_derivative(geom.coset, g, z, i, j, h)
    return out


def generator_split_residual(geom: ScenarioGeometry, f, g, x: np.ndarray,
                             h_amb: float = 1e-4, h_lie: float = 1e-3):
    """Compare the ambient generator applied to F = f(J(x)) g(J2(x)) against
    the declared radial + angular split.  Returns (lhs, rhs)."""

    def big_f(pt):
        return f(geom.project_radial(pt).coords) * g(geom.project_angular(pt))

    lhs = fd_ambient_generator(geom, big_f, x, h_amb)
    y = geom.project_radial(x)
    z = geom.project_angular(x)
    rhs = (g(z) * fd_radial_generator(geom, f, y.coords)
           + f(y.coords) * fd_angular_covariance(geom, g, z, y, h_lie))
    return lhs, rhs
