"""Connections on the trivialized bundle: curvature, gauge action, flat search.

A lattice connection is simply a degree-1 AlgebraForm (the su(2)-valued
1-form A in the fixed trivialization).  Gauge maps are SU(2)-valued site
fields acting by  A . u = Ad_{u^-1} A + u*theta,  with u*theta the discrete
Maurer-Cartan pullback u^-1 du.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import su2
from .errors import GridMismatch, NonConvergence
from .forms import (AlgebraForm, TorusGrid, central_diff, codifferential,
                    exterior_d, l2_inner, wedge_bracket)

# a connection is an AlgebraForm of degree 1; kept as an alias for signatures
LatticeConnection = AlgebraForm


class GaugeMap:
    """SU(2)-valued map on the grid sites.

    Central differences of rough group maps are meaningless, so construction
    rejects maps whose per-link jump ||u(x+e_j) - u(x)||_F reaches 0.5.
    """

    def __init__(self, grid: TorusGrid, values, check_smooth=True):
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape + (2, 2):
            raise ValueError(f"values shape {values.shape}, expected {grid.shape + (2, 2)}")
        defect = su2.unitarity_defect(values)
        if defect > 1e-10:
            raise ValueError(f"gauge map is not unitary (defect {defect:.2e})")
        if check_smooth:
            jump = self._max_link_jump(grid, values)
            if jump >= 0.5:
                raise ValueError(f"gauge map too rough: max link jump {jump:.3f} >= 0.5")
        self.grid = grid
        self.values = values

    @staticmethod
    def _max_link_jump(grid, values):
        jump = 0.0
        for ax in range(grid.dim):
            d = np.roll(values, -1, axis=ax) - values
            jump = max(jump, float(np.max(np.linalg.norm(d, axis=(-2, -1)))))
        return jump

    @classmethod
    def identity(cls, grid):
        vals = np.broadcast_to(su2.IDENTITY, grid.shape + (2, 2)).copy()
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid, element):
        vals = np.broadcast_to(np.asarray(element, dtype=complex), grid.shape + (2, 2)).copy()
        return cls(grid, vals)

    @classmethod
    def from_exponential(cls, xi):
        """exp(xi) for a degree-0 AlgebraForm xi."""
        return cls(xi.grid, su2.exp_alg(xi.data[0]))

    def inverse(self):
        return GaugeMap(self.grid, su2.dagger(self.values), check_smooth=False)

    def __matmul__(self, other):
        if self.grid != other.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")
        return GaugeMap(self.grid, su2.unitarize(self.values @ other.values),
                        check_smooth=False)


def curvature(conn: AlgebraForm) -> AlgebraForm:
    """F_A = dA + (1/2) [A ^ A];  degree-2 form."""
    return exterior_d(conn) + 0.5 * wedge_bracket(conn, conn)


def maurer_cartan_pullback(u: GaugeMap) -> AlgebraForm:
    """Discrete u*theta: per axis, project_to_algebra(u^-1 D_j u).

    Satisfies the structure equation d(u*theta) + (1/2)[u*theta ^ u*theta] = 0
    up to O(h^2) for maps smooth at grid scale.
    """
    grid = u.grid
    out = AlgebraForm.zeros(grid, 1)
    uinv = su2.dagger(u.values)
    for j in range(grid.dim):
        du = central_diff(u.values[None], grid, j)[0]
        out.data[j] = su2.project_to_algebra(uinv @ du)
    return out


def gauge_act(conn: AlgebraForm, u: GaugeMap) -> AlgebraForm:
    """Right gauge action  A . u = Ad_{u^-1} A + u*theta."""
    if conn.grid != u.grid:
        raise GridMismatch(f"{conn.grid} vs {u.grid}")
    out = maurer_cartan_pullback(u)
    uinv = su2.dagger(u.values)
    for j in range(conn.grid.dim):
        out.data[j] = out.data[j] + uinv @ conn.data[j] @ u.values
    return out


def covariant_d(phi: AlgebraForm, conn: AlgebraForm | None) -> AlgebraForm:
    """Covariant derivative d_A phi = d phi + [A ^ phi]."""
    d = exterior_d(phi)
    if conn is None:
        return d
    if conn.grid != phi.grid:
        raise GridMismatch(f"{conn.grid} vs {phi.grid}")
    return d + wedge_bracket(conn, phi)


def flatness_residual(conn: AlgebraForm) -> float:
    """Squared L2 norm of the curvature; zero iff F_A vanishes identically."""
    f = curvature(conn)
    return l2_inner(f, f)


@dataclass
class FlatOpts:
    tol: float = 1e-6
    max_iters: int = 2000
    armijo_c: float = 1e-4
    initial_step: float = 1.0


def find_flat(conn0: AlgebraForm, opts: FlatOpts | None = None) -> AlgebraForm:
    """Gradient descent with Armijo backtracking on E(A) = ||F_A||_L2^2.

    The descent direction is built from the exact discrete adjoint
    (grad E = 2 d_A* F_A), so the line search sees a true gradient and E
    decreases monotonically across accepted steps.  Raises NonConvergence
    (carrying the final residual and iterate) if opts.max_iters steps do not
    reach opts.tol.
    """
    opts = opts or FlatOpts()
    a = conn0.copy()
    energy = flatness_residual(a)
    if energy <= opts.tol:
        return a
    step = opts.initial_step
    for _ in range(opts.max_iters):
        grad = 2.0 * codifferential(curvature(a), a)
        gnorm2 = l2_inner(grad, grad)
        if gnorm2 == 0.0:
            break
        accepted = False
        while step > 1e-16:
            trial = a - step * grad
            trial_energy = flatness_residual(trial)
            if trial_energy <= energy - opts.armijo_c * step * gnorm2:
                a, energy = trial, trial_energy
                accepted = True
                step *= 2.0  # let the next search start a bit more ambitious
                break
            step *= 0.5
        if not accepted:
            break
        if energy <= opts.tol:
            return a
    raise NonConvergence("find_flat did not reach tolerance",
                         residual=energy, iterate=a)
