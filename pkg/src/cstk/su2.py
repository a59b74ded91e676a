"""SU(2) / su(2) matrix core.

Conventions used throughout the toolkit:

* Group elements are 2x2 complex unitary matrices with det = 1, stored as
  numpy arrays of shape (..., 2, 2); every function here broadcasts over
  leading axes.
* Algebra elements are anti-Hermitian traceless 2x2 matrices.
* The fixed basis is  e_k = (i/2) * sigma_k  (sigma_k the Hermitian Pauli
  matrices), so  [e1, e2] = -e3  and cyclic.  Coordinates of X are the reals
  v_k with  X = sum v_k e_k.
* The invariant pairing is  <X, Y> = -(1/(8 pi^2)) tr(XY), which is positive
  definite on su(2); pair(e_k, e_k) = 1/(16 pi^2).
* Quaternion serialization:  U = a I + b (i s1) + c (i s2) + d (i s3)  with
  a^2 + b^2 + c^2 + d^2 = 1, stored as (a, b, c, d).
"""

from __future__ import annotations

import numpy as np

from .errors import BranchPoint

PAIR_SCALE = -1.0 / (8.0 * np.pi ** 2)

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

# e_k = (i/2) sigma_k
E_BASIS = 0.5j * SIGMA

IDENTITY = np.eye(2, dtype=complex)


def dagger(m):
    """Conjugate transpose over the last two axes."""
    return np.conjugate(np.swapaxes(m, -1, -2))


def from_coords(v):
    """Algebra element from real coordinates in the e_k basis."""
    v = np.asarray(v, dtype=float)
    return np.einsum('...k,kij->...ij', v, E_BASIS)


def coords(x):
    """Real coordinates of an algebra element: v_k = -2 tr(X e_k)."""
    x = np.asarray(x, dtype=complex)
    return -2.0 * np.real(np.einsum('...ij,kji->...k', x, E_BASIS))


def from_quaternion(q):
    """Group element from a unit 4-vector (a, b, c, d)."""
    q = np.asarray(q, dtype=float)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    u = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    u[..., 0, 0] = a + 1j * d
    u[..., 0, 1] = c + 1j * b
    u[..., 1, 0] = -c + 1j * b
    u[..., 1, 1] = a - 1j * d
    return u


def quaternion(u):
    """Quaternion components of a group element (inverse of from_quaternion)."""
    u = np.asarray(u, dtype=complex)
    q = np.empty(u.shape[:-2] + (4,), dtype=float)
    q[..., 0] = 0.5 * np.real(u[..., 0, 0] + u[..., 1, 1])
    q[..., 1] = 0.5 * np.imag(u[..., 0, 1] + u[..., 1, 0])
    q[..., 2] = 0.5 * np.real(u[..., 0, 1] - u[..., 1, 0])
    q[..., 3] = 0.5 * np.imag(u[..., 0, 0] - u[..., 1, 1])
    return q


def unitarize(m):
    """Project a near-SU(2) matrix back onto the group.

    Drops the non-quaternionic part and normalizes the quaternion; for
    matrices within rounding of SU(2) this agrees with the polar
    decomposition.  Used to control drift in long products.
    """
    q = quaternion(m)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    return from_quaternion(q / norm)


def exp_alg(x):
    """Exponential of an su(2) element, in closed form.

    With theta = |v|/2 (half the coordinate norm) one has X^2 = -theta^2 I,
    so exp(X) = cos(theta) I + (sin(theta)/theta) X; the ratio is evaluated
    by series below 1e-6 to avoid 0/0.
    """
    x = np.asarray(x, dtype=complex)
    v = coords(x)
    theta = 0.5 * np.linalg.norm(v, axis=-1)
    small = theta < 1e-6
    th_safe = np.where(small, 1.0, theta)
    ratio = np.where(small, 1.0 - theta ** 2 / 6.0 + theta ** 4 / 120.0,
                     np.sin(th_safe) / th_safe)
    eye = np.broadcast_to(IDENTITY, x.shape)
    return np.cos(theta)[..., None, None] * eye + ratio[..., None, None] * x


def log_group(u):
    """Logarithm of a group element, valued in the ball of radius pi.

    Raises BranchPoint when u is within 1e-8 (Frobenius) of -I, where the
    logarithm has no preferred value.
    """
    u = np.asarray(u, dtype=complex)
    defect = np.linalg.norm((u + IDENTITY).reshape(u.shape[:-2] + (4,)), axis=-1)
    if np.any(defect < 1e-8):
        raise BranchPoint("log_group at the antipode -I")
    a = np.clip(0.5 * np.real(u[..., 0, 0] + u[..., 1, 1]), -1.0, 1.0)
    theta = np.arccos(a)
    small = theta < 1e-6
    th_safe = np.where(small, 1.0, theta)
    ratio = np.where(small, 1.0 + theta ** 2 / 6.0 + 7.0 * theta ** 4 / 360.0,
                     th_safe / np.sin(th_safe))
    vec = u - a[..., None, None] * np.broadcast_to(IDENTITY, u.shape)
    return project_to_algebra(ratio[..., None, None] * vec)


def bracket(x, y):
    """Matrix commutator [X, Y] = XY - YX."""
    return x @ y - y @ x


def adjoint_group(g, x):
    """Adjoint action Ad_g X = g X g^-1 (g^-1 = g^dagger on SU(2))."""
    return g @ x @ dagger(g)


def ad_matrix(g):
    """3x3 real matrix of Ad_g in the e_k basis (a rotation)."""
    g = np.asarray(g, dtype=complex)
    cols = [coords(adjoint_group(g, np.broadcast_to(E_BASIS[k], g.shape)))
            for k in range(3)]
    return np.stack(cols, axis=-1)


def ad_algebra_matrix(x):
    """3x3 real matrix of ad_X = [X, .] in the e_k basis (skew-symmetric)."""
    v = coords(x)
    a, b, c = v[..., 0], v[..., 1], v[..., 2]
    zeros = np.zeros_like(a)
    # columns follow from [e_i, e_j] = -eps_ijk e_k
    m = np.stack([
        np.stack([zeros, c, -b], axis=-1),
        np.stack([-c, zeros, a], axis=-1),
        np.stack([b, -a, zeros], axis=-1),
    ], axis=-2)
    return m


def pair(x, y):
    """Invariant pairing <X, Y> = -(1/(8 pi^2)) tr(XY); real, positive definite.

    The trace is grouped so the result is bitwise symmetric in (x, y).
    """
    x = np.asarray(x)
    y = np.asarray(y)
    diag = x[..., 0, 0] * y[..., 0, 0] + x[..., 1, 1] * y[..., 1, 1]
    cross = x[..., 0, 1] * y[..., 1, 0] + x[..., 1, 0] * y[..., 0, 1]
    return PAIR_SCALE * np.real(diag + cross)


def project_to_algebra(m):
    """Anti-Hermitian traceless part of an arbitrary 2x2 matrix.

    Idempotent on algebra elements; used to control drift when differencing
    group-valued grids.
    """
    m = np.asarray(m, dtype=complex)
    anti = 0.5 * (m - dagger(m))
    tr = np.einsum('...ii->...', anti)
    return anti - 0.5 * tr[..., None, None] * np.broadcast_to(IDENTITY, m.shape)


def random_algebra(rng, scale=1.0, shape=()):
    """Seeded random algebra element(s) with coordinates ~ N(0, scale^2)."""
    return from_coords(rng.normal(0.0, scale, size=tuple(shape) + (3,)))


def random_group(rng, shape=()):
    """Seeded Haar-ish random group element(s) via normalized quaternions."""
    q = rng.normal(0.0, 1.0, size=tuple(shape) + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return from_quaternion(q)


def unitarity_defect(u):
    """Frobenius norm of U^dagger U - I (max over any leading axes)."""
    d = dagger(u) @ u - IDENTITY
    return float(np.max(np.linalg.norm(d, axis=(-2, -1))))


def algebra_defect(x):
    """Max of the anti-Hermitian and traceless defects."""
    herm = float(np.max(np.linalg.norm(x + dagger(x), axis=(-2, -1))))
    tr = float(np.max(np.abs(np.einsum('...ii->...', x))))
    return max(herm, tr)
