"""Holonomy of lattice connections along loops, by RK4 integration.

Loops are polylines in universal-cover coordinates; the connection is
interpolated multilinearly between sites.  The parallel-transport equation in
the trivialization is  g' = -A(alpha'(t)) g,  g(0) = I,  and the holonomy is
g(1); with this sign a constant connection  A = Lam dx  gives  exp(-Lam)
around the unit x-loop.

Composition convention: for gamma_1 followed by gamma_2,
hol = hol(gamma_2) . hol(gamma_1).
"""

from __future__ import annotations

import numpy as np

from . import su2
from .errors import NotFlat
from .forms import AlgebraForm
from .gauge import flatness_residual


class LoopPath:
    """Polyline loop in universal-cover coordinates.

    winding = endpoint - startpoint must be (near-)integral per axis, and
    consecutive samples must differ by less than half a period so the lift is
    unambiguous.
    """

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] < 2:
            raise ValueError("need at least two sample points")
        winding = samples[-1] - samples[0]
        if np.max(np.abs(winding - np.round(winding))) > 1e-9:
            raise ValueError(f"endpoint - startpoint = {winding} is not integral")
        if np.max(np.abs(np.diff(samples, axis=0))) >= 0.5:
            raise ValueError("consecutive samples differ by half a period or more")
        self.samples = samples
        self.winding = np.round(winding).astype(int)

    @property
    def dim(self):
        return self.samples.shape[1]

    @classmethod
    def axis_loop(cls, dim, axis, basepoint=None):
        """Unit coordinate loop through the basepoint along one axis."""
        p0 = np.zeros(dim) if basepoint is None else np.asarray(basepoint, float)
        t = np.linspace(0.0, 1.0, 5)
        return cls(p0 + t[:, None] * np.eye(dim)[axis])

    def point_at(self, t):
        """Position along the polyline, parametrized uniformly per segment."""
        t = np.asarray(t, dtype=float)
        nseg = len(self.samples) - 1
        s = np.clip((t * nseg).astype(int), 0, nseg - 1)
        local = t * nseg - s
        return self.samples[s] + local[..., None] * (self.samples[s + 1] - self.samples[s])

    def reversed(self):
        return LoopPath(self.samples[::-1])

    def concatenated(self, other):
        """This loop followed by `other`, translated to start at our endpoint."""
        shift = self.samples[-1] - other.samples[0]
        return LoopPath(np.vstack([self.samples, other.samples[1:] + shift]))

    def resampled(self, n_points):
        t = np.linspace(0.0, 1.0, n_points)
        return LoopPath(self.point_at(t))


def _interp_connection(conn: AlgebraForm, positions):
    """Multilinear periodic interpolation of all d components of a connection.

    positions: (B, d) in torus coordinates.  Returns (B, d, 2, 2).
    """
    grid = conn.grid
    d = grid.dim
    b = positions.shape[0]
    scaled = positions * np.asarray(grid.shape, dtype=float)
    base = np.floor(scaled).astype(int)
    frac = scaled - base
    out = np.zeros((b, d, 2, 2), dtype=complex)
    for corner in range(1 << d):
        offs = np.array([(corner >> a) & 1 for a in range(d)])
        weight = np.ones(b)
        for a in range(d):
            weight = weight * (frac[:, a] if offs[a] else 1.0 - frac[:, a])
        idx = tuple((base[:, a] + offs[a]) % grid.shape[a] for a in range(d))
        vals = conn.data[(slice(None),) + idx]        # (d, B, 2, 2)
        out += weight[:, None, None, None] * np.moveaxis(vals, 0, 1)
    return out


def _rhs(conn, loops, seg_idx, local):
    """-A(alpha') for a batch of loops, inside segment seg_idx at local in [0,1].

    The segment index is passed explicitly so stages that land exactly on a
    polyline corner still use the velocity of the segment being integrated.
    """
    b = len(loops)
    pos = np.empty((b, loops[0].dim))
    vel = np.empty((b, loops[0].dim))
    nseg = len(loops[0].samples) - 1
    for i, loop in enumerate(loops):
        seg = loop.samples[seg_idx + 1] - loop.samples[seg_idx]
        pos[i] = loop.samples[seg_idx] + local * seg
        vel[i] = seg * nseg
    a_vals = _interp_connection(conn, pos % 1.0)
    return -np.einsum('bj,bjkl->bkl', vel, a_vals)


def holonomy_batch(conn: AlgebraForm, loops, steps: int):
    """Classical RK4 for a batch of loops sharing a sample count.

    `steps` is rounded up to a multiple of the segment count so integration
    steps never straddle polyline corners; the group element is re-unitarized
    every step.
    """
    if steps < 8:
        raise ValueError("need at least 8 integration steps")
    nseg = len(loops[0].samples) - 1
    if any(len(lp.samples) - 1 != nseg for lp in loops):
        raise ValueError("batched loops must share their sample count")
    per_seg = int(np.ceil(steps / nseg))
    steps = per_seg * nseg
    dt = 1.0 / steps
    b = len(loops)
    g = np.broadcast_to(su2.IDENTITY, (b, 2, 2)).copy()
    for k in range(steps):
        seg_idx = k // per_seg
        local = (k - seg_idx * per_seg) / per_seg
        dloc = 1.0 / per_seg
        m1 = _rhs(conn, loops, seg_idx, local)
        m2 = _rhs(conn, loops, seg_idx, local + 0.5 * dloc)
        m3 = _rhs(conn, loops, seg_idx, local + dloc)
        k1 = m1 @ g
        k2 = m2 @ (g + 0.5 * dt * k1)
        k3 = m2 @ (g + 0.5 * dt * k2)
        k4 = m3 @ (g + dt * k3)
        g = g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        g = su2.unitarize(g)
    return g


def holonomy(conn: AlgebraForm, loop: LoopPath, steps: int = 256):
    """Holonomy of the connection along one loop."""
    if loop.dim != conn.grid.dim:
        raise ValueError(f"loop dimension {loop.dim} vs grid dimension {conn.grid.dim}")
    return holonomy_batch(conn, [loop], steps)[0]


def holonomy_rep(conn: AlgebraForm, steps: int = 256, flat_tol: float = 1e-6):
    """Holonomies along the d coordinate loops through the origin.

    Requires the connection to be flat within flat_tol (else NotFlat); for a
    flat connection on the torus these generate an abelian representation of
    pi_1 = Z^d, so they commute up to discretization error.
    """
    res = flatness_residual(conn)
    if res > flat_tol:
        raise NotFlat(res, flat_tol)
    d = conn.grid.dim
    loops = [LoopPath.axis_loop(d, a) for a in range(d)]
    return list(holonomy_batch(conn, loops, steps))


def perturbed_family(loop: LoopPath, delta: float, n_samples: int = 257):
    """Smooth same-winding perturbations of a loop (endpoints fixed)."""
    t = np.linspace(0.0, 1.0, n_samples)
    base = loop.point_at(t)
    d = loop.dim
    family = []
    for axis in range(d):
        for freq in (1, 2):
            for profile in (np.sin(2 * np.pi * freq * t), 1.0 - np.cos(2 * np.pi * freq * t)):
                pert = base.copy()
                pert[:, axis] += delta * profile
                family.append(LoopPath(pert))
    return family


def homotopy_invariance_check(conn: AlgebraForm, loop: LoopPath,
                              delta: float = 0.1, steps: int = 512,
                              flat_tol: float = 1e-6):
    """Max holonomy deviation over a family of same-winding perturbed loops.

    For flat connections the holonomy depends only on the homotopy class, so
    the deviation is integrator-level; non-flat connections show a large one.
    """
    res = flatness_residual(conn)
    if res > flat_tol:
        raise NotFlat(res, flat_tol)
    return _holonomy_spread(conn, loop, delta, steps)


def _holonomy_spread(conn, loop, delta, steps):
    base = holonomy(conn, loop.resampled(257), steps)
    family = perturbed_family(loop, delta)
    hols = holonomy_batch(conn, family, steps)
    return float(np.max(np.linalg.norm(hols - base, axis=(-2, -1))))
