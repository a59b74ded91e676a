"""The Chern-Simons 3-form and action, gauge shift, mapping degree, WZW.

With the pairing <.,.> = -(1/(8 pi^2)) tr the 3-form is

    alpha(A) = <A ^ F_A> - (1/6) <A ^ [A ^ A]>,

and cs(A) is its integral over T^3.  The orientation of the bundled degree-1
map is fixed so that it shifts cs by +1 (the integrality test pins the sign
convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import su2
from .errors import DimMismatch, GridMismatch, NotInteger
from .forms import (AlgebraForm, ScalarForm, TorusGrid, integrate,
                    wedge_bracket, wedge_pair)
from .gauge import GaugeMap, curvature, gauge_act, maurer_cartan_pullback


@dataclass
class CsReport:
    value: float
    gauge_shift: float | None = None
    nearest_integer: int | None = None
    residual: float | None = None


def cs_form(conn: AlgebraForm) -> ScalarForm:
    """alpha(A) = <A ^ F_A> - (1/6) <A ^ [A ^ A]> as a top form on T^3."""
    if conn.grid.dim != 3:
        raise DimMismatch(f"cs_form needs a 3-torus, got dim {conn.grid.dim}")
    f = curvature(conn)
    cubic = wedge_pair(conn, wedge_bracket(conn, conn))
    return wedge_pair(conn, f) - (1.0 / 6.0) * cubic


def cs(conn: AlgebraForm) -> float:
    """Chern-Simons action: the integral of the 3-form."""
    return integrate(cs_form(conn))


def dcs(conn: AlgebraForm, eta: AlgebraForm) -> float:
    """Differential of cs at A in direction eta: 2 * integral <F_A ^ eta>.

    Exact for the discrete action (summation by parts is exact), so it
    matches centered finite differences of cs to the cubic-term epsilon^2.
    """
    if conn.grid != eta.grid:
        raise GridMismatch(f"{conn.grid} vs {eta.grid}")
    return 2.0 * integrate(wedge_pair(curvature(conn), eta))


def degree_integrand(u: GaugeMap) -> ScalarForm:
    theta = maurer_cartan_pullback(u)
    return -(1.0 / 6.0) * wedge_pair(theta, wedge_bracket(theta, theta))


def degree(u: GaugeMap):
    """Mapping degree of u: T^3 -> SU(2) as (raw integral, nearest integer).

    Raises NotInteger when the integral is 0.25 or further from an integer,
    which signals an under-resolved map.
    """
    if u.grid.dim != 3:
        raise DimMismatch(f"degree needs a 3-torus, got dim {u.grid.dim}")
    r = integrate(degree_integrand(u))
    nearest = int(np.round(r))
    if abs(r - nearest) >= 0.25:
        raise NotInteger(r)
    return r, nearest


def gauge_shift(conn: AlgebraForm, u: GaugeMap) -> CsReport:
    """cs(A.u) - cs(A); integer up to discretization, equal to degree(u)."""
    if conn.grid.dim != 3:
        raise DimMismatch(f"gauge_shift needs a 3-torus, got dim {conn.grid.dim}")
    if conn.grid != u.grid:
        raise GridMismatch(f"{conn.grid} vs {u.grid}")
    base = cs(conn)
    shifted = cs(gauge_act(conn, u))
    shift = shifted - base
    nearest = int(np.round(shift))
    if abs(shift - nearest) >= 0.25:
        raise NotInteger(shift)
    return CsReport(value=shifted, gauge_shift=shift, nearest_integer=nearest,
                    residual=abs(shift - nearest))


def _smoothstep(s):
    return s * s * (3.0 - 2.0 * s)


def bump_gauge_map(grid: TorusGrid, radius: float = 0.48,
                   check_smooth: bool = True) -> GaugeMap:
    """The bundled degree-1 map: radial suspension in a ball, identity outside.

    Inside the ball around the torus center the map sweeps the suspension
    angle from pi (center) to 0 (boundary) with a C^1 smoothstep profile; the
    orientation makes the degree +1.  The default radius keeps the per-link
    jump under the 0.5 smoothness gate for n >= 32; pass check_smooth=False
    for deliberately under-resolved probes.
    """
    if grid.dim != 3:
        raise DimMismatch("bump map lives on T^3")
    mesh = grid.mesh()
    rel = np.stack([m - 0.5 for m in mesh], axis=-1)
    r = np.linalg.norm(rel, axis=-1)
    rsafe = np.where(r < 1e-12, 1.0, r)
    nhat = rel / rsafe[..., None]
    angle = -np.pi * _smoothstep(np.clip(1.0 - r / radius, 0.0, 1.0))
    nsigma = np.einsum('...k,kij->...ij', nhat, su2.SIGMA)
    vals = (np.cos(angle)[..., None, None] * np.eye(2)
            + 1j * np.sin(angle)[..., None, None] * nsigma)
    return GaugeMap(grid, vals, check_smooth=check_smooth)


def pointwise_power(u: GaugeMap, k: int) -> GaugeMap:
    """Pointwise k-th power; for the bump map this multiplies the degree by k."""
    vals = np.broadcast_to(su2.IDENTITY, u.values.shape).copy()
    for _ in range(abs(k)):
        vals = vals @ u.values
    if k < 0:
        vals = su2.dagger(vals)
    return GaugeMap(u.grid, su2.unitarize(vals), check_smooth=False)


def wzw(xi: AlgebraForm, time_slices: int = 33) -> float:
    """Wess-Zumino-Witten value of g = exp(xi) on a 2-torus.

    Evaluates  -(1/6) int_X <theta ^ [theta ^ theta]>  over the canonical
    exponential extension g_t = exp(t xi) on X = [0,1] x Sigma.  The time
    component of the pulled-back form is xi exactly (slices share the
    generator), so the integrand reduces per slice to  -<xi, [theta_1,
    theta_2]>, integrated with the trapezoid rule in t.
    """
    if xi.grid.dim != 2:
        raise DimMismatch(f"wzw needs a 2-torus, got dim {xi.grid.dim}")
    if xi.degree != 0:
        raise DimMismatch("wzw takes a degree-0 generator")
    times = np.linspace(0.0, 1.0, time_slices)
    vals = np.empty(time_slices)
    for i, t in enumerate(times):
        vals[i] = _wzw_slice_integral(xi.grid, su2.exp_alg(t * xi.data[0]), xi.data[0])
    return float(np.trapezoid(vals, times))


def _wzw_slice_integral(grid, g_vals, theta_t):
    """int_Sigma -<theta_t, [theta_1, theta_2]> for one time slice."""
    u = GaugeMap(grid, g_vals, check_smooth=False)
    theta = maurer_cartan_pullback(u)
    br = su2.bracket(theta.data[0], theta.data[1])
    density = -su2.pair(theta_t, br)
    return float(grid.cell_volume * np.sum(density))


def wzw_product_extension(xis, time_slices: int = 33) -> float:
    """WZW value of the pointwise product exp(xi_1)...exp(xi_k) on T^2.

    Uses the concatenated homotopy  exp(t xi_1), then exp(xi_1) exp(t xi_2),
    ...  so every stage has the exact time component xi_j.
    """
    grid = xis[0].grid
    total = 0.0
    prefix = np.broadcast_to(su2.IDENTITY, grid.shape + (2, 2)).copy()
    times = np.linspace(0.0, 1.0, time_slices)
    for xi in xis:
        vals = np.empty(time_slices)
        for i, t in enumerate(times):
            g_vals = su2.unitarize(prefix @ su2.exp_alg(t * xi.data[0]))
            vals[i] = _wzw_slice_integral(grid, g_vals, xi.data[0])
        total += float(np.trapezoid(vals, times))
        prefix = su2.unitarize(prefix @ su2.exp_alg(xi.data[0]))
    return total


@dataclass
class ChernWeilReport:
    residual_max: float
    integral_defect: float


def chern_weil_check(conn: AlgebraForm) -> ChernWeilReport:
    """On T^4: max norm of  d(alpha_3(A)) - <F_A ^ F_A>  over sites.

    The 3-form analog of the Chern-Simons form is built from the same
    formula; its exterior derivative reproduces the Chern-Weil 4-form up to
    O(h^2) (exactly, for constant connections).  Also reports the total
    integral of <F ^ F>, which must vanish to rounding: the discrete
    integral of an exact form is exactly zero, and the bundle is trivial.
    """
    grid = conn.grid
    if grid.dim != 4:
        raise DimMismatch(f"chern_weil_check needs a 4-torus, got dim {grid.dim}")
    f = curvature(conn)
    alpha3 = wedge_pair(conn, f) - (1.0 / 6.0) * wedge_pair(conn, wedge_bracket(conn, conn))
    from .forms import exterior_d
    lhs = exterior_d(alpha3)
    rhs = wedge_pair(f, f)
    residual = float(np.max(np.abs(lhs.data - rhs.data)))
    return ChernWeilReport(residual_max=residual,
                           integral_defect=abs(integrate(rhs)))
