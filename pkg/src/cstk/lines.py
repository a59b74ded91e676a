"""The Chern-Simons line over connections on a 2-torus.

Fibers are unit complex numbers in the trivialization fixed by the standard
section: the transition cocycle is

    c_Sigma(a, g) = exp(2 pi i ( int_Sigma <Ad_{g^-1} a ^ g*theta> + W(g) )),

parallel transport along a path of connections a_t is

    PT(a_t) = exp(-2 pi i int_0^1 int_Sigma <a_t ^ da_t/dt> dt),

and the same number arises as exp(2 pi i cs) of the product connection on
the cylinder [0,1] x Sigma (with one-sided time stencils at the boundary
slices, since the cylinder is not periodic in time).
"""

from __future__ import annotations

import numpy as np

from . import su2
from .cs import wzw, wzw_product_extension
from .errors import DimMismatch, GridMismatch
from .forms import AlgebraForm, integrate, wedge_pair
from .gauge import GaugeMap, curvature, covariant_d, maurer_cartan_pullback


def _require_t2(grid):
    if grid.dim != 2:
        raise DimMismatch(f"this operation lives on T^2, got dim {grid.dim}")


def c_sigma(a: AlgebraForm, xi: AlgebraForm, time_slices: int = 33) -> complex:
    """Transition cocycle value for the gauge map g = exp(xi)."""
    _require_t2(a.grid)
    if a.grid != xi.grid:
        raise GridMismatch(f"{a.grid} vs {xi.grid}")
    g = GaugeMap(a.grid, su2.exp_alg(xi.data[0]), check_smooth=False)
    return _cocycle_phase(a, g, wzw(xi, time_slices=time_slices))


def c_sigma_product(a: AlgebraForm, xis, time_slices: int = 33) -> complex:
    """Cocycle value for the pointwise product g = exp(xi_1)...exp(xi_k).

    The WZW term uses the concatenated exponential homotopy, which keeps
    every stage's extension explicit; the mod-Z ambiguity of that choice
    cancels in the unit-circle value.
    """
    _require_t2(a.grid)
    vals = np.broadcast_to(su2.IDENTITY, a.grid.shape + (2, 2)).copy()
    for xi in xis:
        vals = su2.unitarize(vals @ su2.exp_alg(xi.data[0]))
    g = GaugeMap(a.grid, vals, check_smooth=False)
    return _cocycle_phase(a, g, wzw_product_extension(xis, time_slices=time_slices))


def _cocycle_phase(a, g, wzw_value):
    theta = maurer_cartan_pullback(g)
    ad_a = AlgebraForm.zeros(a.grid, 1)
    for j in range(a.grid.dim):
        ad_a.data[j] = su2.dagger(g.values) @ a.data[j] @ g.values
    action = integrate(wedge_pair(ad_a, theta)) + wzw_value
    return complex(np.exp(2j * np.pi * action))


def line_connection_form(a: AlgebraForm, eta: AlgebraForm) -> complex:
    """Connection 1-form of the line bundle: 2 pi i int <a ^ eta>."""
    _require_t2(a.grid)
    if a.grid != eta.grid:
        raise GridMismatch(f"{a.grid} vs {eta.grid}")
    return 2j * np.pi * integrate(wedge_pair(a, eta))


class ConnectionPath:
    """Uniformly sampled path of connections on one T^2 grid."""

    def __init__(self, samples, times=None):
        if len(samples) < 2:
            raise ValueError("need at least two path samples")
        grid = samples[0].grid
        for s in samples:
            if s.grid != grid:
                raise GridMismatch("path samples live on different grids")
            if s.degree != 1:
                raise ValueError("path samples must be connections (degree 1)")
        _require_t2(grid)
        if times is None:
            times = np.linspace(0.0, 1.0, len(samples))
        times = np.asarray(times, dtype=float)
        if len(times) != len(samples) or times[0] != 0.0 or times[-1] != 1.0 \
                or np.any(np.diff(times) <= 0):
            raise ValueError("times must increase strictly from 0 to 1")
        self.samples = list(samples)
        self.times = times
        self.grid = grid

    def reversed(self):
        return ConnectionPath(self.samples[::-1])

    def time_derivatives(self):
        """Second-order time derivatives: centered inside, one-sided at ends."""
        n = len(self.samples)
        dt = self.times[1] - self.times[0]
        data = np.stack([s.data for s in self.samples])  # (n, ncomp, *shape, 2, 2)
        dot = np.empty_like(data)
        dot[1:-1] = (data[2:] - data[:-2]) / (2 * dt)
        dot[0] = (-3 * data[0] + 4 * data[1] - data[2]) / (2 * dt)
        dot[-1] = (3 * data[-1] - 4 * data[-2] + data[-3]) / (2 * dt)
        out = []
        for k in range(n):
            form = AlgebraForm.zeros(self.grid, 1)
            form.data[:] = dot[k]
            out.append(form)
        return out


def parallel_transport(path: ConnectionPath) -> complex:
    """PT along the path: exp(-2 pi i int <a ^ a_dot>), trapezoid in time."""
    dots = path.time_derivatives()
    vals = np.array([integrate(wedge_pair(a, da))
                     for a, da in zip(path.samples, dots)])
    total = float(np.trapezoid(vals, path.times))
    return complex(np.exp(-2j * np.pi * total))


def cylinder_cs(path: ConnectionPath) -> complex:
    """exp(2 pi i cs) of the product connection on [0,1] x Sigma.

    Builds the honest 3-dimensional connection A = (A_t = 0, a_t) on the
    product grid, assembles F = dA + (1/2)[A^A] with one-sided second-order
    stencils in time (the cylinder has boundary there; a periodic wrap would
    be wrong) and periodic central differences in space, evaluates the full
    Chern-Simons density <A^F> - (1/6)<A^[A^A]>, and integrates with the
    trapezoid rule in time.
    """
    grid = path.grid
    dt_ax = _time_diff_stack
    nt = len(path.samples)
    # component arrays over the product grid: index [time, site..., 2, 2]
    a0 = np.zeros((nt,) + grid.shape + (2, 2), dtype=complex)
    a1 = np.stack([s.data[0] for s in path.samples])
    a2 = np.stack([s.data[1] for s in path.samples])
    dt = path.times[1] - path.times[0]

    def dspace(arr, axis):
        ax = axis + 1  # axis 0 is time
        return (np.roll(arr, -1, axis=ax) - np.roll(arr, 1, axis=ax)) \
            / (2.0 * grid.spacing[axis])

    f01 = dt_ax(a1, dt) - dspace(a0, 0) + su2.bracket(a0, a1)
    f02 = dt_ax(a2, dt) - dspace(a0, 1) + su2.bracket(a0, a2)
    f12 = dspace(a2, 0) - dspace(a1, 1) + su2.bracket(a1, a2)
    br01 = 2.0 * su2.bracket(a0, a1)
    br02 = 2.0 * su2.bracket(a0, a2)
    br12 = 2.0 * su2.bracket(a1, a2)
    density = (su2.pair(a0, f12) - su2.pair(a1, f02) + su2.pair(a2, f01)
               - (su2.pair(a0, br12) - su2.pair(a1, br02)
                  + su2.pair(a2, br01)) / 6.0)
    slice_integrals = grid.cell_volume * density.reshape(nt, -1).sum(axis=1)
    cs_val = float(np.trapezoid(slice_integrals, path.times))
    return complex(np.exp(2j * np.pi * cs_val))


def _time_diff_stack(arr, dt):
    """d/dt of a time-stacked array: centered inside, one-sided at the ends."""
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - arr[:-2]) / (2 * dt)
    out[0] = (-3 * arr[0] + 4 * arr[1] - arr[2]) / (2 * dt)
    out[-1] = (3 * arr[-1] - 4 * arr[-2] + arr[-3]) / (2 * dt)
    return out


def symplectic_form(eta1: AlgebraForm, eta2: AlgebraForm) -> float:
    """omega(eta1, eta2) = -2 int <eta1 ^ eta2>: antisymmetric, nondegenerate."""
    _require_t2(eta1.grid)
    if eta1.grid != eta2.grid:
        raise GridMismatch(f"{eta1.grid} vs {eta2.grid}")
    return -2.0 * integrate(wedge_pair(eta1, eta2))


def moment_map(a: AlgebraForm, xi: AlgebraForm) -> float:
    """mu_xi(a) = 2 int <F_a ^ xi>; zero on flat connections."""
    _require_t2(a.grid)
    if a.grid != xi.grid:
        raise GridMismatch(f"{a.grid} vs {xi.grid}")
    return 2.0 * integrate(wedge_pair(curvature(a), xi))


def moment_hamiltonian_residual(a: AlgebraForm, xi: AlgebraForm,
                                eta: AlgebraForm, eps: float = 1e-5) -> float:
    """|omega(d_a xi, eta) - directional derivative of mu_xi at a along eta|.

    The moment map is quadratic in a, so the centered difference is exact up
    to rounding; discrete summation by parts makes the identity hold to
    machine precision.
    """
    lhs = symplectic_form(covariant_d(xi, a), eta)
    plus = moment_map(a + eps * eta, xi)
    minus = moment_map(a - eps * eta, xi)
    return abs(lhs - (plus - minus) / (2 * eps))
