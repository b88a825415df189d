"""Homogeneous-space geometry for the angular state spaces K/M.

Three families cover every built-in scenario:

* ``SphereCoset(d)``    -- SO(d) acting on S^{d-1}, M = stabilizer of the pole
* ``RotationGroupCoset(n)`` -- K/M = SO(n) itself (M trivial)
* ``SignedFrameCoset(n)``   -- SO(n) modulo even sign flips of the columns
                               (eigenframes of symmetric matrices)

Each geometry supplies a section map (a measurable right inverse of the
projection K -> K/M, continuous on charts), exponential coordinates around
the origin, the Ad(M) action on the chosen complement basis, and batched
variants of the hot operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iproduct

import numpy as np

from . import groups, linalg
from .groups import GroupElement
from .linalg import DomainError

UNIT_TOL = 1e-10
CHART_GUARD = 0.1  # switch section charts this close to the singular locus


@dataclass(frozen=True)
class CosetPoint:
    """Point of K/M in the model representation of its geometry."""
    value: np.ndarray
    space: str

    def __post_init__(self):
        v = np.asarray(self.value, dtype=float)
        object.__setattr__(self, "value", v)
        if self.space == "sphere":
            if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
                raise ValueError("sphere representative is not a unit vector")
        v.setflags(write=False)


class CosetGeometry:
    """Shared interface; see subclasses for the concrete model spaces."""

    space: str
    p: int
    group_n: int
    chart_radius: float
    basis_p: list[np.ndarray]

    # -- single-point API (module boundary) --
    def origin(self) -> CosetPoint:
        raise NotImplementedError

    def act(self, k: np.ndarray, z: CosetPoint) -> CosetPoint:
        raise NotImplementedError

    def section(self, z: CosetPoint) -> GroupElement:
        raise NotImplementedError

    def section_chart(self, z: CosetPoint) -> int:
        return 0

    def coords(self, z: CosetPoint) -> np.ndarray:
        raise NotImplementedError

    def point_from_coords(self, phi) -> CosetPoint:
        raise NotImplementedError

    def project_group(self, k: np.ndarray) -> CosetPoint:
        """Natural projection K -> K/M applied to a group matrix."""
        raise NotImplementedError

    def distance(self, z1: CosetPoint, z2: CosetPoint) -> float:
        raise NotImplementedError

    def increment(self, z_prev: CosetPoint, z_next: CosetPoint) -> CosetPoint:
        """S(z_prev)^{-1} z_next, the left increment between two points."""
        s = self.section(z_prev).matrix
        return self.act(s.T, z_next)

    # -- M data --
    def sample_m(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def m_elements(self) -> list[np.ndarray] | None:
        """Enumeration of M when finite, else None."""
        return None

    def ad_m_matrix(self, m: np.ndarray) -> np.ndarray:
        """Ad(m) restricted to span(basis_p), as a p x p matrix."""
        return groups.adjoint_matrix(m, self.basis_p)

    def random_point(self, rng: np.random.Generator) -> CosetPoint:
        return self.project_group(groups.haar_matrices(self.group_n, rng, 1)[0])

    # -- batched API (raw arrays; value layout matches CosetPoint.value) --
    def coords_batch(self, zs: np.ndarray):
        """Returns (phi array (B, p), inside-chart mask (B,))."""
        raise NotImplementedError

    def section_batch(self, zs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def increment_batch(self, z_prev: np.ndarray, z_next: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def act_batch(self, ks: np.ndarray, zs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance_batch(self, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def points_from_coords_batch(self, phi: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SphereCoset(CosetGeometry):
    """SO(d)/SO(d-1) modeled as unit vectors in R^d with origin e_0."""

    space = "sphere"

    def __init__(self, d: int, chart_radius: float = 3.0):
        if d < 2:
            raise ValueError("sphere coset needs d >= 2")
        self.group_n = d
        self.p = d - 1
        self.chart_radius = chart_radius
        full = groups.so_basis(d)
        # pairs (0, j) come first in so_basis order: those span the complement
        self.basis_p = full[: d - 1]
        self.basis_m = full[d - 1:]
        self._flip = np.eye(d)
        self._flip[0, 0] = -1.0
        self._flip[1, 1] = -1.0  # rotation by pi in the (e0, e1) plane

    def origin(self) -> CosetPoint:
        v = np.zeros(self.group_n)
        v[0] = 1.0
        return CosetPoint(v, self.space)

    def act(self, k, z):
        return CosetPoint(np.asarray(k) @ z.value, self.space)

    def act_batch(self, ks, zs):
        return np.einsum("...ij,...j->...i", ks, zs)

    def project_group(self, k):
        return CosetPoint(np.asarray(k)[:, 0].copy(), self.space)

    def section_chart(self, z) -> int:
        theta = np.arccos(np.clip(z.value[0], -1.0, 1.0))
        return 1 if theta > np.pi - CHART_GUARD else 0

    def section(self, z):
        return GroupElement(self._section_one(z.value))

    def _section_one(self, v: np.ndarray) -> np.ndarray:
        d = self.group_n
        c = float(np.clip(v[0], -1.0, 1.0))
        if c < -np.cos(CHART_GUARD):
            # alternate chart anchored at the rotated origin
            inner = self._section_one(self._flip @ v)
            return self._flip @ inner
        theta = np.arccos(c)
        if theta < 1e-14:
            return np.eye(d)
        a = np.zeros(d)
        a[0] = 1.0
        b = v - c * a
        b = b / np.linalg.norm(b)
        return (np.eye(d) + np.sin(theta) * (np.outer(b, a) - np.outer(a, b))
                + (np.cos(theta) - 1.0) * (np.outer(a, a) + np.outer(b, b)))

    def section_batch(self, zs):
        zs = np.asarray(zs, dtype=float)
        d = self.group_n
        c = np.clip(zs[..., 0], -1.0, 1.0)
        far = c < -np.cos(CHART_GUARD)
        work = np.where(far[..., None], zs @ self._flip.T, zs)
        cw = np.clip(work[..., 0], -1.0, 1.0)
        theta = np.arccos(cw)
        b = work.copy()
        b[..., 0] = 0.0
        nb = np.linalg.norm(b, axis=-1)
        safe = nb > 1e-14
        b = np.where(safe[..., None], b / np.where(safe, nb, 1.0)[..., None], 0.0)
        eye = np.broadcast_to(np.eye(d), zs.shape[:-1] + (d, d))
        ba = b[..., :, None] * np.eye(d)[0][None, :]
        ab = np.eye(d)[0][:, None] * b[..., None, :]
        bb = b[..., :, None] * b[..., None, :]
        aa = np.outer(np.eye(d)[0], np.eye(d)[0])
        sec = (eye + np.sin(theta)[..., None, None] * (ba - ab)
               + (np.cos(theta) - 1.0)[..., None, None] * (aa + bb))
        if np.any(far):
            sec = np.where(far[..., None, None], self._flip @ sec, sec)
        return sec

    def coords(self, z):
        phi, ok = self.coords_batch(z.value[None])
        if not ok[0]:
            raise DomainError("point outside the exponential chart radius")
        return phi[0]

    def coords_batch(self, zs):
        zs = np.asarray(zs, dtype=float)
        c = np.clip(zs[..., 0], -1.0, 1.0)
        theta = np.arccos(c)
        w = zs[..., 1:]
        s = np.sin(theta)
        small = theta < 1e-8
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(small, 1.0, theta / np.where(small, 1.0, s))
        phi = scale[..., None] * w
        return phi, theta <= self.chart_radius

    def point_from_coords(self, phi):
        return CosetPoint(self.points_from_coords_batch(np.asarray(phi, float)[None])[0],
                          self.space)

    def points_from_coords_batch(self, phi):
        phi = np.asarray(phi, dtype=float)
        theta = np.linalg.norm(phi, axis=-1)
        small = theta < 1e-14
        with np.errstate(invalid="ignore", divide="ignore"):
            sinc = np.where(small, 1.0, np.sin(theta) / np.where(small, 1.0, theta))
        out = np.empty(phi.shape[:-1] + (self.group_n,))
        out[..., 0] = np.cos(theta)
        out[..., 1:] = sinc[..., None] * phi
        return out

    def distance(self, z1, z2):
        return float(np.arccos(np.clip(z1.value @ z2.value, -1.0, 1.0)))

    def distance_batch(self, z1, z2):
        dots = np.sum(np.asarray(z1) * np.asarray(z2), axis=-1)
        return np.arccos(np.clip(dots, -1.0, 1.0))

    def increment_batch(self, z_prev, z_next):
        sec = self.section_batch(z_prev)
        return np.einsum("...ji,...j->...i", sec, z_next)

    def sample_m(self, rng):
        d = self.group_n
        m = np.eye(d)
        if d > 2:
            m[1:, 1:] = groups.haar_matrices(d - 1, rng, 1)[0]
        return m

    def m_elements(self):
        return [np.eye(self.group_n)] if self.group_n == 2 else None


class RotationGroupCoset(CosetGeometry):
    """K/M = SO(n) with trivial M; the model point is the matrix itself."""

    space = "group"

    def __init__(self, n: int, chart_radius: float = 3.0):
        if n not in (2, 3):
            raise ValueError("rotation-group coset implemented for n in {2, 3}")
        self.group_n = n
        self.basis_p = groups.so_basis(n)
        self.p = len(self.basis_p)
        self.chart_radius = chart_radius if n == 3 else np.pi

    def origin(self):
        return CosetPoint(np.eye(self.group_n), self.space)

    def act(self, k, z):
        return CosetPoint(np.asarray(k) @ z.value, self.space)

    def act_batch(self, ks, zs):
        return np.matmul(ks, zs)

    def project_group(self, k):
        return CosetPoint(np.asarray(k, dtype=float).copy(), self.space)

    def section(self, z):
        return GroupElement(z.value.copy())

    def section_batch(self, zs):
        return np.asarray(zs, dtype=float)

    def coords(self, z):
        phi, ok = self.coords_batch(z.value[None])
        if not ok[0]:
            raise DomainError("rotation outside the exponential chart radius")
        return phi[0]

    def coords_batch(self, zs):
        zs = np.asarray(zs, dtype=float)
        if self.group_n == 2:
            ang = linalg.rot2_angle(zs)
            phi = ang[..., None]
        else:
            # so_basis(3) order is (0,1),(0,2),(1,2); map axis-angle onto it
            v = linalg.rot3_log(zs)
            phi = np.stack([v[..., 2], -v[..., 1], v[..., 0]], axis=-1)
        return phi, np.linalg.norm(phi, axis=-1) <= self.chart_radius

    def point_from_coords(self, phi):
        return CosetPoint(self.points_from_coords_batch(np.asarray(phi, float)[None])[0],
                          self.space)

    def points_from_coords_batch(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.group_n == 2:
            return linalg.rot2(phi[..., 0])
        v = np.stack([phi[..., 2], -phi[..., 1], phi[..., 0]], axis=-1)
        return linalg.rot3_exp(v)

    def distance(self, z1, z2):
        return float(self.distance_batch(z1.value[None], z2.value[None])[0])

    def distance_batch(self, z1, z2):
        rel = np.matmul(np.swapaxes(np.asarray(z1), -1, -2), np.asarray(z2))
        if self.group_n == 2:
            return np.abs(linalg.rot2_angle(rel))
        tr = np.clip((np.einsum("...ii->...", rel) - 1.0) * 0.5, -1.0, 1.0)
        return np.arccos(tr)

    def increment_batch(self, z_prev, z_next):
        return np.matmul(np.swapaxes(np.asarray(z_prev), -1, -2), np.asarray(z_next))

    def sample_m(self, rng):
        return np.eye(self.group_n)

    def m_elements(self):
        return [np.eye(self.group_n)]

    def ad_m_matrix(self, m):
        return np.eye(self.p)


class SignedFrameCoset(CosetGeometry):
    """SO(n) modulo M = diagonal matrices with entries +-1 and det 1.

    Model points are canonical representatives: each column's largest-
    magnitude entry is positive, with the last column flipped back when the
    sign pattern would leave the coset (odd number of flips).
    """

    space = "signed_frame"

    def __init__(self, n: int, chart_radius: float = 0.7):
        self.group_n = n
        self.basis_p = groups.so_basis(n)
        self.p = len(self.basis_p)
        self.chart_radius = chart_radius
        self._m_cache = [np.diag(np.array(eps, dtype=float))
                         for eps in _iproduct(*[(1.0, -1.0)] * n)
                         if np.prod(eps) > 0]

    def canonicalize(self, q: np.ndarray) -> np.ndarray:
        q = np.array(q, dtype=float, copy=True)
        idx = np.argmax(np.abs(q), axis=0)
        signs = np.sign(q[idx, range(q.shape[1])])
        signs = np.where(signs == 0.0, 1.0, signs)
        if np.prod(signs) < 0:
            signs[-1] = -signs[-1]
        return q * signs[None, :]

    def representatives(self, z: CosetPoint) -> list[np.ndarray]:
        return [z.value @ m for m in self._m_cache]

    def origin(self):
        return CosetPoint(np.eye(self.group_n), self.space)

    def act(self, k, z):
        return CosetPoint(self.canonicalize(np.asarray(k) @ z.value), self.space)

    def project_group(self, k):
        return CosetPoint(self.canonicalize(k), self.space)

    def section(self, z):
        return GroupElement(z.value.copy())

    def section_batch(self, zs):
        return np.asarray(zs, dtype=float)

    def nearest_representative(self, z: CosetPoint, anchor: np.ndarray) -> np.ndarray:
        """Representative of z closest to the anchor group matrix."""
        reps = self.representatives(z)
        dists = [np.linalg.norm(r - anchor) for r in reps]
        return reps[int(np.argmin(dists))]

    def coords(self, z):
        rep = self.nearest_representative(z, np.eye(self.group_n))
        xi = groups.log_map(GroupElement(rep), self.basis_p)
        phi = xi.coefficients
        if np.linalg.norm(phi) > self.chart_radius:
            raise DomainError("coset increment outside the exponential chart")
        return phi

    def coords_batch(self, zs):
        zs = np.asarray(zs, dtype=float)
        if self.group_n == 2:
            # single angle mod pi, folded to (-pi/2, pi/2]
            ang = linalg.rot2_angle(zs)
            ang = np.where(ang > np.pi / 2, ang - np.pi, ang)
            ang = np.where(ang <= -np.pi / 2, ang + np.pi, ang)
            phi = ang[..., None]
            return phi, np.abs(ang) <= self.chart_radius
        flat = zs.reshape(-1, self.group_n, self.group_n)
        phi = np.empty((flat.shape[0], self.p))
        ok = np.empty(flat.shape[0], dtype=bool)
        for i, q in enumerate(flat):
            try:
                phi[i] = self.coords(CosetPoint(self.canonicalize(q), self.space))
                ok[i] = True
            except DomainError:
                phi[i] = np.nan
                ok[i] = False
        return phi.reshape(zs.shape[:-2] + (self.p,)), ok.reshape(zs.shape[:-2])

    def point_from_coords(self, phi):
        xi = groups.AlgebraElement.from_coefficients(phi, self.basis_p)
        return self.project_group(groups.exp_map(xi).matrix)

    def points_from_coords_batch(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.group_n == 2:
            return linalg.rot2(phi[..., 0])
        flat = phi.reshape(-1, self.p)
        out = np.empty((flat.shape[0], self.group_n, self.group_n))
        for i, c in enumerate(flat):
            out[i] = self.point_from_coords(c).value
        return out.reshape(phi.shape[:-1] + (self.group_n, self.group_n))

    def distance(self, z1, z2):
        best = np.inf
        for r in self.representatives(z2):
            rel = z1.value.T @ r
            tr = np.clip((np.trace(rel) - (self.group_n - 2.0)) / 2.0, -1.0, 1.0) \
                if self.group_n == 3 else np.clip(rel[0, 0], -1.0, 1.0)
            best = min(best, float(np.arccos(tr)))
        return best

    def increment(self, z_prev, z_next):
        return self.project_group(z_prev.value.T @ z_next.value)

    def increment_batch(self, z_prev, z_next):
        rel = np.matmul(np.swapaxes(np.asarray(z_prev), -1, -2), np.asarray(z_next))
        if self.group_n == 2:
            return rel  # coords_batch folds mod pi; no canonical form needed
        flat = rel.reshape(-1, self.group_n, self.group_n)
        for i in range(flat.shape[0]):
            flat[i] = self.canonicalize(flat[i])
        return flat.reshape(rel.shape)

    def sample_m(self, rng):
        return self._m_cache[rng.integers(len(self._m_cache))]

    def m_elements(self):
        return list(self._m_cache)


# --- module-boundary wrappers (the group_core operation surface) ------------

def section(z: CosetPoint, geometry: CosetGeometry) -> GroupElement:
    """Section map S with pi(S(z)) = z; never fails on the singular locus
    (an alternate chart takes over there)."""
    return geometry.section(z)


def exp_coords(z: CosetPoint, geometry: CosetGeometry) -> np.ndarray:
    """Exponential coordinates phi of z around the origin: z = exp(sum phi_i
    xi_i) o.  Raises DomainError outside the chart radius."""
    return geometry.coords(z)
