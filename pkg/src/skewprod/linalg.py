"""Small-matrix numerics: exponentials, logarithms, orthonormalization,
batched Rodrigues formulas and a batched cyclic-Jacobi eigensolver.

Everything here targets n <= 6, where truncated series at machine
precision beat any Pade machinery.
"""

from __future__ import annotations

import numpy as np

LOG_DOMAIN_RADIUS = 1.0  # principal branch: ||g - I||_F must stay below this


class DomainError(ValueError):
    """Input outside the valid domain of a numerical routine."""


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a truncated series."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise DomainError("non-finite entries in matrix exponential input")
    norm = np.linalg.norm(m)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    a = m / (2.0 ** s)
    n = m.shape[0]
    term = np.eye(n)
    out = np.eye(n)
    for k in range(1, 40):
        term = term @ a / k
        out = out + term
        if np.linalg.norm(term) < 1e-18 * max(1.0, np.linalg.norm(out)):
            break
    for _ in range(s):
        out = out @ out
    return out


def _sqrtm_db(a: np.ndarray, iters: int = 60) -> np.ndarray:
    """Principal matrix square root via the Denman-Beavers iteration."""
    y = a.copy()
    z = np.eye(a.shape[0])
    for _ in range(iters):
        yi = np.linalg.inv(y)
        zi = np.linalg.inv(z)
        y_next = 0.5 * (y + zi)
        z_next = 0.5 * (z + yi)
        if np.linalg.norm(y_next - y) < 1e-15 * max(1.0, np.linalg.norm(y)):
            y = y_next
            break
        y, z = y_next, z_next
    return y


def logm(g: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm by inverse scaling-and-squaring.

    Repeated Denman-Beavers square roots pull g toward the identity, then a
    Mercator series finishes.  Only valid on ||g - I||_F < 1; callers working
    with larger moves must subdivide.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if np.linalg.norm(g - np.eye(n)) >= LOG_DOMAIN_RADIUS:
        raise DomainError(
            "matrix outside principal-branch region (||g-I|| >= 1); "
            "subdivide the increment before taking the logarithm")
    s = 0
    a = g.copy()
    while np.linalg.norm(a - np.eye(n)) > 0.25 and s < 40:
        a = _sqrtm_db(a)
        s += 1
    e = a - np.eye(n)
    term = e.copy()
    out = e.copy()
    for k in range(2, 60):
        term = -term @ e
        out = out + term / k
        if np.linalg.norm(term) < 1e-18 * max(1.0, np.linalg.norm(out)):
            break
    return out * (2.0 ** s)


def gram_schmidt(m: np.ndarray) -> np.ndarray:
    """Re-orthonormalize the columns of m by modified Gram-Schmidt."""
    q = np.array(m, dtype=float, copy=True)
    n = q.shape[1]
    for j in range(n):
        for i in range(j):
            q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


# --- batched so(3) helpers -------------------------------------------------

def hat3(v: np.ndarray) -> np.ndarray:
    """(..., 3) axis vectors -> (..., 3, 3) skew matrices."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee3(w: np.ndarray) -> np.ndarray:
    """Inverse of hat3 on the skew part."""
    w = np.asarray(w, dtype=float)
    return np.stack([w[..., 2, 1] - w[..., 1, 2],
                     w[..., 0, 2] - w[..., 2, 0],
                     w[..., 1, 0] - w[..., 0, 1]], axis=-1) * 0.5


def rot3_exp(v: np.ndarray) -> np.ndarray:
    """Batched Rodrigues exponential: (..., 3) -> (..., 3, 3) rotations."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    w = hat3(v)
    w2 = w @ w
    t2 = theta * theta
    small = theta < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(small, 1.0 - t2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
        b = np.where(small, 0.5 - t2 / 24.0,
                     (1.0 - np.cos(theta)) / np.where(small, 1.0, t2))
    out = np.broadcast_to(np.eye(3), w.shape).copy()
    out += a[..., None, None] * w + b[..., None, None] * w2
    return out


def rot3_log(r: np.ndarray) -> np.ndarray:
    """Batched rotation logarithm: (..., 3, 3) -> (..., 3) axis-angle vectors.

    Accurate for angles up to ~pi - 1e-3; rotations that close to the cut
    locus never appear as path increments here.
    """
    r = np.asarray(r, dtype=float)
    tr = np.clip((r[..., 0, 0] + r[..., 1, 1] + r[..., 2, 2] - 1.0) * 0.5, -1.0, 1.0)
    theta = np.arccos(tr)
    v = vee3(r)  # = sin(theta) * axis
    sin_t = np.sin(theta)
    small = theta < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(small, 1.0 + theta * theta / 6.0,
                         theta / np.where(small, 1.0, sin_t))
    big = theta > np.pi - 1e-3
    if np.any(big):
        # near-pi fallback: axis from the symmetric part, one matrix at a time
        idx = np.argwhere(big)
        flat = r.reshape(-1, 3, 3)
        vflat = v.reshape(-1, 3)
        sflat = scale.reshape(-1)
        for (k,) in np.argwhere(big.reshape(-1)):
            m = logm_rotation_safe(flat[k])
            vflat[k] = m
            sflat[k] = 1.0
        v = vflat.reshape(v.shape)
        scale = sflat.reshape(scale.shape)
        del idx
    return scale[..., None] * v


def logm_rotation_safe(r: np.ndarray) -> np.ndarray:
    """Axis-angle of a single 3x3 rotation, stable near angle pi."""
    tr = np.clip((np.trace(r) - 1.0) * 0.5, -1.0, 1.0)
    theta = np.arccos(tr)
    if theta < np.pi - 1e-3:
        return vee3(r) * (theta / max(np.sin(theta), 1e-300))
    # R = I + sin(t) W + (1-cos(t)) W^2: extract axis from (R + I)/2 diag
    b = (r + np.eye(3)) * 0.5
    axis = np.sqrt(np.clip(np.diag(b) - (1.0 + tr) * 0.5, 0.0, None) / (1.0 - tr) * 2.0) \
        if (1.0 - tr) > 0 else np.array([1.0, 0.0, 0.0])
    axis = axis / np.linalg.norm(axis)
    # fix signs using off-diagonal symmetric entries
    if b[0, 1] < 0 and axis[0] * axis[1] > 0:
        axis[1] = -axis[1]
    if b[0, 2] < 0 and axis[0] * axis[2] > 0:
        axis[2] = -axis[2]
    return axis * theta


def rot2(theta: np.ndarray) -> np.ndarray:
    """Batched 2x2 rotation matrices from angles."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def rot2_angle(r: np.ndarray) -> np.ndarray:
    """Angles of batched 2x2 rotations, in (-pi, pi]."""
    r = np.asarray(r, dtype=float)
    return np.arctan2(r[..., 1, 0], r[..., 0, 0])


# --- batched cyclic Jacobi eigendecomposition ------------------------------

def jacobi_eigh(mats: np.ndarray, sweeps: int = 12):
    """Eigendecomposition of a batch of small symmetric matrices.

    Cyclic-by-rows Jacobi rotations, vectorized across the batch.  Returns
    (eigenvalues in non-ascending order, eigenvector matrices in SO(n) with
    a deterministic sign convention: each column's largest-magnitude entry
    positive, determinant corrected by flipping the last column).
    """
    a = np.array(mats, dtype=float, copy=True)
    single = a.ndim == 2
    if single:
        a = a[None]
    b, n, _ = a.shape
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    for _ in range(sweeps):
        off2 = np.sum(a ** 2, axis=(1, 2)) - np.sum(a[:, range(n), range(n)] ** 2, axis=1)
        if np.all(off2 < 1e-28):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                active = np.abs(apq) > 1e-300
                app, aqq = a[:, p, p], a[:, q, q]
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    tau = (aqq - app) / np.where(active, 2.0 * apq, 1.0)
                    t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
                t = np.where(tau == 0.0, 1.0, t)
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # plane rotation on rows/cols p and q
                ap = a[:, :, p].copy()
                aq = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * ap - s[:, None] * aq
                a[:, :, q] = s[:, None] * ap + c[:, None] * aq
                ap = a[:, p, :].copy()
                aq = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * ap - s[:, None] * aq
                a[:, q, :] = s[:, None] * ap + c[:, None] * aq
                vp = v[:, :, p].copy()
                vq = v[:, :, q].copy()
                v[:, :, p] = c[:, None] * vp - s[:, None] * vq
                v[:, :, q] = s[:, None] * vp + c[:, None] * vq
    w = a[:, range(n), range(n)]
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    # deterministic representative: largest-|entry| of each column positive
    idx = np.argmax(np.abs(v), axis=1)
    signs = np.sign(np.take_along_axis(v, idx[:, None, :], axis=1))[:, 0, :]
    signs = np.where(signs == 0.0, 1.0, signs)
    v = v * signs[:, None, :]
    det = np.linalg.det(v)
    v[det < 0, :, -1] *= -1.0
    if single:
        return w[0], v[0]
    return w, v
