"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance below is fixed, nothing is calibrated at run time.
"""

import time

import numpy as np
import pytest

from cstk import su2
from cstk.cs import bump_gauge_map, cs, dcs, degree, gauge_shift
from cstk.forms import AlgebraForm, TorusGrid, random_algebra_form
from cstk.gauge import GaugeMap, covariant_d, curvature, gauge_act
from cstk.groups import (bundled_presentation, cohomology_dims,
                         enumerate_components, parse_presentation,
                         random_representation, Representation,
                         restriction_image_dim, solve_representation,
                         stabilizer_dim, surface_presentation)
from cstk.holonomy import LoopPath, holonomy, homotopy_invariance_check
from cstk.lines import (ConnectionPath, c_sigma, c_sigma_product, cylinder_cs,
                        moment_hamiltonian_residual, moment_map,
                        parallel_transport)
from cstk.spectral import (DiscLoopFamily, TracePolynomial, assemble_D,
                           eigen, perturbation_hf, spectral_flow)


def announce(number, text):
    print(f"\nPASS criterion {number}: {text}")


def constant_connection(grid, elements):
    conn = AlgebraForm.zeros(grid, 1)
    for j, lam in enumerate(elements):
        conn.data[j] = lam
    return conn


def test_criterion_1_degree_integrality():
    t0 = time.perf_counter()
    errs = {}
    for n in (32, 64):
        grid = TorusGrid((n, n, n))
        r, k = degree(bump_gauge_map(grid))
        if n == 32:
            assert 0.95 <= r <= 1.05, f"degree integral {r} outside [0.95, 1.05]"
        assert k == 1
        errs[n] = abs(r - 1.0)
    ratio = errs[32] / errs[64]
    assert ratio >= 3.0, f"refinement improved the degree only {ratio:.2f}x"
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    announce(1, f"degree-1 map integral in [0.95, 1.05] at n=32; doubling n "
                f"shrinks the defect {ratio:.2f}x (runtime {elapsed:.1f}s < 60s)")


def test_criterion_2_gauge_shift_mod_z():
    t0 = time.perf_counter()
    grid = TorusGrid((32, 32, 32))
    rng = np.random.default_rng(202)
    conn = random_algebra_form(grid, 1, rng, scale=0.15, kmax=1)
    rep = gauge_shift(conn, bump_gauge_map(grid))
    defect = abs(rep.gauge_shift - 1.0)
    assert defect < 0.05, f"|cs(A.u) - cs(A) - 1| = {defect:.4f}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    announce(2, f"cs gauge shift within {defect:.4f} of +1 at n=32 "
                f"(runtime {elapsed:.1f}s < 60s)")


def test_criterion_3_gradient_identity():
    t0 = time.perf_counter()
    grid = TorusGrid((12, 12, 12))
    rng = np.random.default_rng(303)
    eps = 1e-5
    worst = 0.0
    for _ in range(20):
        a = random_algebra_form(grid, 1, rng, scale=0.8)
        eta = random_algebra_form(grid, 1, rng, scale=0.8)
        exact = dcs(a, eta)
        fd = (cs(a + eps * eta) - cs(a - eps * eta)) / (2 * eps)
        rel = abs(exact - fd) / max(abs(exact), 1e-3)
        worst = max(worst, rel)
    assert worst <= 1e-8, f"worst relative error {worst:.2e}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    announce(3, f"dcs matches centered differences to {worst:.2e} relative "
                f"over 20 pairs (runtime {elapsed:.1f}s < 10s)")


def test_criterion_4_covariance_and_bianchi():
    # Bianchi at constant connections is an exact discrete identity
    grid = TorusGrid((8, 8, 8))
    rng = np.random.default_rng(404)
    const = constant_connection(grid, su2.random_algebra(rng, shape=(3,)))
    bianchi = covariant_d(curvature(const), const).max_norm()
    assert bianchi <= 1e-10, f"constant-connection Bianchi residual {bianchi:.2e}"
    # curvature covariance converges at second order
    errs = []
    for n in (12, 24):
        g = TorusGrid((n, n, n))
        rng_local = np.random.default_rng(404)
        a = random_algebra_form(g, 1, rng_local, scale=0.8)
        u = GaugeMap.from_exponential(
            random_algebra_form(g, 0, rng_local, scale=0.25, kmax=1))
        f_acted = curvature(gauge_act(a, u))
        f = curvature(a)
        uinv = su2.dagger(u.values)
        expected = AlgebraForm.zeros(g, 2)
        for k in range(len(f.indices)):
            expected.data[k] = uinv @ f.data[k] @ u.values
        errs.append((f_acted - expected).max_norm())
    ratio = errs[0] / errs[1]
    assert 3.0 <= ratio <= 5.0, f"covariance error ratio {ratio:.2f} not in [3, 5]"
    announce(4, f"Bianchi residual {bianchi:.1e} <= 1e-10; covariance error "
                f"ratio {ratio:.2f} in [3, 5] for n=12 -> 24")


def test_criterion_5_holonomy():
    grid = TorusGrid((16, 16, 16))
    rng = np.random.default_rng(505)
    lam = su2.random_algebra(rng)
    conn = constant_connection(grid, [lam, np.zeros((2, 2)), np.zeros((2, 2))])
    u = holonomy(conn, LoopPath.axis_loop(3, 0), steps=256)
    closed_form_err = np.linalg.norm(u - su2.exp_alg(-lam))
    assert closed_form_err <= 1e-8

    flat = constant_connection(grid, [lam, 0.6 * lam, -0.2 * lam])
    dev_flat = homotopy_invariance_check(flat, LoopPath.axis_loop(3, 0),
                                         delta=0.1, steps=512)
    assert dev_flat <= 1e-3

    _, y, _ = grid.mesh()
    nonflat = AlgebraForm.zeros(grid, 1)
    nonflat.data[0] = np.sin(2 * np.pi * y)[..., None, None] * su2.from_coords([1.2, 0, 0])
    dev_nonflat = homotopy_invariance_check(nonflat, LoopPath.axis_loop(3, 0),
                                            delta=0.1, steps=512,
                                            flat_tol=np.inf)
    assert dev_nonflat >= 1e-2
    announce(5, f"x-loop holonomy matches exp(-Lam) to {closed_form_err:.1e}; "
                f"homotopy deviation {dev_flat:.1e} (flat) vs "
                f"{dev_nonflat:.1e} (non-flat)")


def test_criterion_6_cohomology_dimensions():
    t0 = time.perf_counter()
    surf = surface_presentation(2)
    rng = np.random.default_rng(606)
    rho = Representation(surf, [su2.random_group(rng), su2.IDENTITY,
                                su2.random_group(rng), su2.IDENTITY])
    dims = cohomology_dims(surf, rho)
    assert dims.h1 == 6
    assert min(dims.gaps.values()) >= 10.0
    assert restriction_image_dim(2, rho) == 3

    free2 = parse_presentation("<a,b>")
    triv = Representation(free2, [su2.IDENTITY, su2.IDENTITY])
    fdims = cohomology_dims(free2, triv)
    assert (fdims.z1, fdims.b1) == (6, 0)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    announce(6, f"genus-2 h1 = 6, restriction image = 3, free-group "
                f"(z1, b1) = (6, 0), gaps >= 10x (runtime {elapsed:.2f}s < 5s)")


def test_criterion_7_trefoil_and_poincare():
    t0 = time.perf_counter()
    tref = bundled_presentation("trefoil")
    rng = np.random.default_rng(707)
    sampled = 0
    for _ in range(60):
        try:
            rho = solve_representation(tref, random_representation(tref, rng))
        except Exception:
            continue
        assert rho.max_residual <= 1e-10
        if stabilizer_dim(rho) == 0:
            assert cohomology_dims(tref, rho).h1 == 1
            sampled += 1
    assert sampled >= 10, f"only {sampled} irreducible trefoil points sampled"

    poin = bundled_presentation("poincare")
    classes500 = enumerate_components(poin, trials=500, seed=708)
    classes2000 = enumerate_components(poin, trials=2000, seed=709)
    assert len(classes500) == 2, f"{len(classes500)} classes at 500 trials"
    assert len(classes2000) == 2, f"{len(classes2000)} classes at 2000 trials"
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    announce(7, f"trefoil: residuals <= 1e-10 and h1 = 1 at {sampled} "
                f"irreducible points; Poincare sphere: exactly 2 classes at "
                f"500 and 2000 trials (runtime {elapsed:.1f}s < 120s)")


def test_criterion_8_line_cocycle_and_cylinder():
    t0 = time.perf_counter()
    residuals = {}
    for n in (12, 24):
        grid = TorusGrid((n, n))
        rng = np.random.default_rng(808)
        a = random_algebra_form(grid, 1, rng, scale=0.4, kmax=1)
        xi1 = random_algebra_form(grid, 0, rng, scale=0.3, kmax=1)
        xi2 = random_algebra_form(grid, 0, rng, scale=0.3, kmax=1)
        g1 = GaugeMap(grid, su2.exp_alg(xi1.data[0]), check_smooth=False)
        lhs = c_sigma(gauge_act(a, g1), xi2, 65) * c_sigma(a, xi1, 65)
        rhs = c_sigma_product(a, [xi1, xi2], 65)
        residuals[n] = abs(lhs - rhs)
    assert residuals[24] <= 1e-2
    order = residuals[12] / residuals[24]
    assert order >= 2.5, f"cocycle residual ratio {order:.2f} below order h^2"

    grid = TorusGrid((24, 24))
    rng = np.random.default_rng(809)
    a0 = random_algebra_form(grid, 1, rng, scale=0.6, kmax=1)
    a1 = random_algebra_form(grid, 1, rng, scale=0.6, kmax=1)
    ts = np.linspace(0.0, 1.0, 64)
    path = ConnectionPath([AlgebraForm(grid, 1,
                                       np.cos(t * np.pi / 2) * a0.data
                                       + np.sin(t * np.pi / 2) * a1.data)
                           for t in ts], ts)
    gap = abs(cylinder_cs(path) - parallel_transport(path))
    assert gap <= 1e-3
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    announce(8, f"cocycle residual {residuals[24]:.1e} <= 1e-2 at n=24 "
                f"(order ratio {order:.2f}); |cylinder - PT| = {gap:.1e} "
                f"<= 1e-3 (runtime {elapsed:.1f}s < 120s)")


def test_criterion_9_moment_map():
    grid = TorusGrid((16, 16))
    rng = np.random.default_rng(909)
    lam = su2.from_coords([0.5, 0.0, 0.3])
    flat = AlgebraForm.zeros(grid, 1)
    flat.data[0] = lam
    worst_flat = max(abs(moment_map(flat, random_algebra_form(grid, 0, rng)))
                     for _ in range(5))
    assert worst_flat <= 1e-10
    a = random_algebra_form(grid, 1, rng, scale=0.7)
    xi = random_algebra_form(grid, 0, rng, scale=0.7)
    eta = random_algebra_form(grid, 1, rng, scale=0.7)
    ham = moment_hamiltonian_residual(a, xi, eta)
    assert ham <= 1e-8
    announce(9, f"moment map vanishes at flat connections to {worst_flat:.1e}; "
                f"Hamiltonian consistency residual {ham:.1e} <= 1e-8")


def test_criterion_10_spectral():
    t0 = time.perf_counter()
    kernel_dims = {}
    for n in (4, 6, 8):
        grid = TorusGrid((n, n, n))
        op = assemble_D(AlgebraForm.zeros(grid, 1))
        assert op.symmetry_defect() == 0.0
        if n <= 6:
            values = eigen(op, "dense").values
        else:
            values = eigen(op, "near-zero", k=30).values
        kernel_dims[n] = int(np.sum(np.abs(values) < 1e-8))
    assert kernel_dims == {4: 12, 6: 12, 8: 12}, kernel_dims
    dense_time = time.perf_counter() - t0
    assert dense_time < 120.0

    grid = TorusGrid((4, 4, 4))
    rng = np.random.default_rng(1010)
    a = random_algebra_form(grid, 1, rng, scale=0.4)
    drift = random_algebra_form(grid, 1, rng, scale=0.02)
    const = spectral_flow([a, a, a], epsilon=1e-6)
    assert const.sf == 0 and const.warnings == []
    ts = np.linspace(0.0, 1.0, 4)
    leg1 = [AlgebraForm(grid, 1, a.data + t * drift.data) for t in ts]
    leg2 = [AlgebraForm(grid, 1, a.data + (1 - t) * drift.data) for t in ts]
    sf1 = spectral_flow(leg1, epsilon=1e-6)
    sf2 = spectral_flow(leg2, epsilon=1e-6)
    closed = spectral_flow(leg1 + leg2[1:], epsilon=1e-6)
    assert not (sf1.warnings or sf2.warnings or closed.warnings)
    assert sf1.sf + sf2.sf == closed.sf == 0
    announce(10, f"dim ker D_0 = 12 at n = 4, 6, 8; D exactly symmetric; "
                 f"SF(const) = 0, additivity and closed-path SF = 0 with no "
                 f"warnings (runtime {time.perf_counter() - t0:.1f}s < 120s)")


def test_criterion_11_perturbation_gauge_invariance():
    specimens = [
        TracePolynomial(terms=[(1.0, [((0,), 1)])]),
        TracePolynomial(terms=[(1.0, [((0,), 2)])]),
        TracePolynomial(terms=[(0.5, [((0, 1), 1)]), (1.0, [((1,), 1)])]),
    ]
    family = DiscLoopFamily(disc_points=7)
    worst_ratio = 0.0
    for idx, f in enumerate(specimens):
        res = {}
        for n in (8, 16):
            grid = TorusGrid((n, n, n))
            rng = np.random.default_rng(1111)
            conn = random_algebra_form(grid, 1, rng, scale=0.5, kmax=1)
            u = GaugeMap.from_exponential(
                random_algebra_form(grid, 0, rng, scale=0.2, kmax=1))
            base = perturbation_hf(conn, family, f, steps=64)
            acted = perturbation_hf(gauge_act(conn, u), family, f, steps=64)
            res[n] = abs(acted - base)
        # measured C at n=8 bounds the n=16 residual via C h^2 (h halves)
        measured_c = res[8] / (1.0 / 8) ** 2
        bound = 1.5 * measured_c * (1.0 / 16) ** 2
        assert res[16] <= bound, (f"specimen {idx}: residual {res[16]:.2e} "
                                  f"above measured-C h^2 bound {bound:.2e}")
        worst_ratio = max(worst_ratio, res[16] / bound)
    announce(11, f"three trace-polynomial perturbations gauge-invariant "
                 f"within measured-C h^2 at n=16 (worst margin use "
                 f"{worst_ratio:.2f} of bound)")
