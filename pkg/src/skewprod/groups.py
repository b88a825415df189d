"""Matrix Lie group substrate: group and algebra elements for SO(n) and
so(n), exponential/logarithm, adjoint action, and Haar sampling.

Values are immutable after construction and safe to share across threads;
all randomness flows through an explicit generator argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import DomainError

ORTHO_TOL = 1e-8
DET_TOL = 1e-6
SKEW_TOL = 1e-12
RENORM_EVERY = 64  # compositions between Gram-Schmidt passes


class InvalidElement(ValueError):
    """Matrix fails the invariants of its declared group or algebra."""


@dataclass(frozen=True)
class GroupElement:
    """Element of a matrix group, validated on construction."""
    matrix: np.ndarray
    group_tag: str = "SO"
    ops: int = 0  # compositions since the last re-orthonormalization

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if not np.all(np.isfinite(m)):
            raise InvalidElement("non-finite entries in group element")
        if self.group_tag.startswith("SO"):
            n = m.shape[0]
            if np.linalg.norm(m.T @ m - np.eye(n)) > ORTHO_TOL:
                raise InvalidElement("matrix is not orthogonal within tolerance")
            if abs(np.linalg.det(m) - 1.0) > DET_TOL:
                raise InvalidElement("determinant differs from 1")
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def compose(self, other: "GroupElement") -> "GroupElement":
        m = self.matrix @ other.matrix
        ops = self.ops + other.ops + 1
        if ops >= RENORM_EVERY and self.group_tag.startswith("SO"):
            m = linalg.gram_schmidt(m)
            ops = 0
        return GroupElement(m, self.group_tag, ops)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.matrix.T.copy(), self.group_tag, self.ops)

    @staticmethod
    def identity(n: int, group_tag: str = "SO") -> "GroupElement":
        return GroupElement(np.eye(n), group_tag)


def so_basis(n: int) -> list[np.ndarray]:
    """Orthonormal basis of so(n) under <x, y> = -tr(x y)/2.

    Order: (0,1), (0,2), ..., (0,n-1), (1,2), ... with E[i,j] = -E[j,i] = 1
    meaning xi takes e_i to e_j... concretely xi = e_j e_i^T - e_i e_j^T.
    """
    basis = []
    for i in range(n - 1):
        for j in range(i + 1, n):
            m = np.zeros((n, n))
            m[j, i] = 1.0
            m[i, j] = -1.0
            basis.append(m)
    return basis


@dataclass(frozen=True)
class AlgebraElement:
    """Element of a matrix Lie algebra with coefficients in a declared basis."""
    matrix: np.ndarray
    basis: tuple = ()
    coefficients: np.ndarray = field(default=None)  # type: ignore[assignment]
    algebra_tag: str = "so"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if not np.all(np.isfinite(m)):
            raise InvalidElement("non-finite entries in algebra element")
        if self.algebra_tag == "so" and np.linalg.norm(m + m.T) > SKEW_TOL:
            raise InvalidElement("matrix is not skew-symmetric within tolerance")
        if self.coefficients is None and self.basis:
            coeffs = np.array([inner_product(m, b) for b in self.basis])
            object.__setattr__(self, "coefficients", coeffs)
        if self.coefficients is not None:
            c = np.asarray(self.coefficients, dtype=float)
            object.__setattr__(self, "coefficients", c)
            c.setflags(write=False)
        self.matrix.setflags(write=False)

    @staticmethod
    def from_coefficients(coeffs, basis, algebra_tag: str = "so") -> "AlgebraElement":
        coeffs = np.asarray(coeffs, dtype=float)
        m = sum(c * b for c, b in zip(coeffs, basis))
        return AlgebraElement(m, tuple(basis), coeffs, algebra_tag)

    def norm(self) -> float:
        return float(np.sqrt(max(inner_product(self.matrix, self.matrix), 0.0)))


def inner_product(x: np.ndarray, y: np.ndarray) -> float:
    """Invariant inner product <x, y> = -tr(x y)/2 on so(n)."""
    return -0.5 * float(np.trace(x @ y))


def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def exp_map(xi: AlgebraElement, group_tag: str = "SO") -> GroupElement:
    """Group exponential of an algebra element."""
    return GroupElement(linalg.expm(xi.matrix), group_tag)


def log_map(g: GroupElement, basis=None) -> AlgebraElement:
    """Principal logarithm of a group element near the identity.

    Raises DomainError outside ||g - I||_F < 1; callers should subdivide
    larger moves (every consumer here works with small increments).
    """
    m = linalg.logm(g.matrix)
    if g.group_tag.startswith("SO"):
        m = 0.5 * (m - m.T)  # project rounding noise back to skew
    return AlgebraElement(m, tuple(basis) if basis is not None else ())


def adjoint(g: GroupElement, xi: AlgebraElement) -> AlgebraElement:
    """Adjoint action Ad(g) xi = g xi g^-1."""
    m = g.matrix @ xi.matrix @ g.matrix.T
    if xi.algebra_tag == "so":
        m = 0.5 * (m - m.T)
    return AlgebraElement(m, xi.basis, None, xi.algebra_tag)


def adjoint_matrix(g: np.ndarray, basis) -> np.ndarray:
    """Matrix of Ad(g) restricted to span(basis), in that basis."""
    cols = []
    for b in basis:
        ad = g @ b @ g.T
        cols.append([inner_product(ad, e) for e in basis])
    return np.array(cols).T


def haar_sample(n: int, rng: np.random.Generator, group_tag: str = "SO") -> GroupElement:
    """Uniform sample from SO(n): QR of a Gaussian matrix with sign fix."""
    return GroupElement(haar_matrices(n, rng, 1)[0], group_tag)


def haar_matrices(n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Batch of Haar-uniform SO(n) matrices, shape (count, n, n)."""
    a = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(a)
    d = np.sign(np.einsum("bii->bi", r))
    d = np.where(d == 0.0, 1.0, d)
    q = q * d[:, None, :]
    det = np.linalg.det(q)
    q[det < 0, :, -1] *= -1.0
    return q
