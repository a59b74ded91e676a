import numpy as np
import pytest

from cstk import su2
from cstk.errors import NonConvergence, ParseError
from cstk.groups import (Representation, bundled_presentation,
                         cocycle_of_word, cohomology_dims, enumerate_components,
                         eval_word, normalize_conjugacy, parse_presentation,
                         random_representation, restriction_image_dim,
                         solve_representation, stabilizer_dim,
                         surface_presentation)


def test_parse_z2():
    p = parse_presentation("<a,b | [a,b]>")
    assert p.generators == ("a", "b")
    assert len(p.relators) == 1
    assert len(p.relators[0]) == 4  # a b a^-1 b^-1


def test_parse_trefoil():
    p = parse_presentation("<x,y | x^2 y^-3>")
    assert p.relators[0] == ((0, 1), (0, 1), (1, -1), (1, -1), (1, -1))


def test_parse_free_group():
    p = parse_presentation("<a,b>")
    assert p.relators == ()


def test_parse_parenthesized_power():
    p = parse_presentation("<x,y | (x y)^-2>")
    assert p.relators[0] == ((1, -1), (0, -1), (1, -1), (0, -1))


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as exc:
        parse_presentation("<a | >")
    assert exc.value.position == 5
    with pytest.raises(ParseError):
        parse_presentation("<a, a | a>")
    with pytest.raises(ParseError):
        parse_presentation("<a | b>")
    with pytest.raises(ParseError):
        parse_presentation("a, b | a")


def test_parse_round_trip():
    for text in ("<a,b | [a,b]>", "<x,y | x^2 y^-3>", "<a,b>"):
        p = parse_presentation(text)
        assert parse_presentation(str(p)) == p


def test_eval_word():
    p = parse_presentation("<a,b>")
    rng = np.random.default_rng(0)
    rho = random_representation(p, rng)
    assert np.array_equal(eval_word(rho.images, ()), su2.IDENTITY)
    w = ((0, 1), (0, -1))
    assert np.linalg.norm(eval_word(rho.images, w) - su2.IDENTITY) <= 1e-14
    # commuting images satisfy the commutator relator
    lam = su2.from_coords([0.0, 0.0, 0.7])
    images = [su2.exp_alg(lam), su2.exp_alg(2.0 * lam)]
    comm = ((0, 1), (1, 1), (0, -1), (1, -1))
    assert np.linalg.norm(eval_word(images, comm) - su2.IDENTITY) <= 1e-13


def test_solve_commuting_seed_returned_unchanged():
    p = parse_presentation("<a,b | [a,b]>")
    lam = su2.from_coords([0.3, 0.0, 0.0])
    images = [su2.exp_alg(lam), su2.exp_alg(-0.8 * lam)]
    seed = Representation(p, images)
    out = solve_representation(p, seed)
    assert all(np.array_equal(a, b) for a, b in zip(out.images, images))


def test_solve_trefoil_pattern():
    # central solutions force x^2 = y^3 = -I: tr x = 0, tr y = 1
    p = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(1)
    found = 0
    for _ in range(30):
        rho = solve_representation(p, random_representation(p, rng))
        assert rho.max_residual <= 1e-10
        if stabilizer_dim(rho) == 0:
            found += 1
            assert abs(np.real(np.trace(rho.images[0]))) <= 1e-6
            assert abs(np.real(np.trace(rho.images[1])) - 1.0) <= 1e-6
    assert found >= 5


def test_solve_forced_identity():
    # <a | a^2, a^3> has only the trivial SU(2) point
    p = parse_presentation("<a | a^2, a^3>")
    rng = np.random.default_rng(2)
    for _ in range(10):
        try:
            rho = solve_representation(p, random_representation(p, rng))
        except NonConvergence:
            continue
        assert np.linalg.norm(rho.images[0] - su2.IDENTITY) <= 1e-6


def test_normalize_conjugacy_orbit_collapse():
    p = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(3)
    rho = solve_representation(p, random_representation(p, rng))
    norm1 = normalize_conjugacy(rho)
    for _ in range(5):
        g = su2.random_group(rng)
        conj = Representation(p, [su2.dagger(g) @ u @ g for u in rho.images])
        norm2 = normalize_conjugacy(conj)
        for a, b in zip(norm1.images, norm2.images):
            assert np.linalg.norm(a - b) <= 1e-10


def test_normalize_conjugacy_idempotent_and_trace_preserving():
    p = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(4)
    rho = solve_representation(p, random_representation(p, rng))
    once = normalize_conjugacy(rho)
    twice = normalize_conjugacy(once)
    for a, b in zip(once.images, twice.images):
        assert np.linalg.norm(a - b) <= 1e-12
    for a, b in zip(rho.images, once.images):
        assert abs(np.trace(a) - np.trace(b)) <= 1e-12
    # all-central representations are untouched
    central = Representation(p, [-su2.IDENTITY, -su2.IDENTITY])
    out = normalize_conjugacy(central)
    assert all(np.array_equal(a, b) for a, b in zip(out.images, central.images))


def test_stabilizer_dims():
    free2 = parse_presentation("<a,b>")
    triv = Representation(free2, [su2.IDENTITY, su2.IDENTITY])
    assert stabilizer_dim(triv) == 3
    # maximal-torus images, not all central
    lam = su2.from_coords([0.0, 0.0, 1.0])
    torus = Representation(free2, [su2.exp_alg(lam), su2.exp_alg(0.3 * lam)])
    assert stabilizer_dim(torus) == 1
    rng = np.random.default_rng(5)
    tref = parse_presentation("<x,y | x^2 y^-3>")
    while True:
        rho = solve_representation(tref, random_representation(tref, rng))
        if abs(np.real(np.trace(rho.images[0]))) <= 1e-8:
            break
    assert stabilizer_dim(rho) == 0
    assert stabilizer_dim(rho, cutoff=1e-6) == 0  # rank stable across cutoffs


def test_cocycle_rules():
    p = parse_presentation("<a,b>")
    rng = np.random.default_rng(6)
    rho = random_representation(p, rng)
    zero = np.zeros((2, 2, 2), dtype=complex)
    w = ((0, 1), (1, -1), (0, -1))
    assert np.linalg.norm(cocycle_of_word(rho, zero, w)) == 0.0
    # g g^-1 cancels exactly
    xi = np.stack([su2.random_algebra(rng), su2.random_algebra(rng)])
    cancel = cocycle_of_word(rho, xi, ((0, 1), (0, -1)))
    assert np.linalg.norm(cancel) <= 1e-15
    # linearity
    xi2 = np.stack([su2.random_algebra(rng), su2.random_algebra(rng)])
    a, b = 0.37, -1.4
    lhs = cocycle_of_word(rho, a * xi + b * xi2, w)
    rhs = a * cocycle_of_word(rho, xi, w) + b * cocycle_of_word(rho, xi2, w)
    assert np.linalg.norm(lhs - rhs) <= 1e-12


def test_coboundaries_are_cocycles():
    p = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(7)
    rho = solve_representation(p, random_representation(p, rng))
    v = su2.random_algebra(rng)
    xi = np.stack([su2.adjoint_group(u, v) - v for u in rho.images])
    for w in p.relators:
        val = cocycle_of_word(rho, xi, w)
        assert np.linalg.norm(val) <= 1e-8 * len(w)


def test_cohomology_free_group_trivial_rep():
    free2 = parse_presentation("<a,b>")
    triv = Representation(free2, [su2.IDENTITY, su2.IDENTITY])
    dims = cohomology_dims(free2, triv)
    assert (dims.z1, dims.b1, dims.h1, dims.h0) == (6, 0, 6, 3)


def test_cohomology_surface_irreducible():
    surf = surface_presentation(2)
    rng = np.random.default_rng(8)
    rho = Representation(surf, [su2.random_group(rng), su2.IDENTITY,
                                su2.random_group(rng), su2.IDENTITY])
    assert rho.valid
    dims = cohomology_dims(surf, rho)
    assert dims.h1 == 6
    assert min(dims.gaps.values()) >= 10.0


def test_cohomology_trefoil_h1_cross_validated():
    tref = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(9)
    seen = 0
    for _ in range(40):
        rho = solve_representation(tref, random_representation(tref, rng))
        if stabilizer_dim(rho) != 0:
            continue
        dims = cohomology_dims(tref, rho)
        assert dims.h1 == 1
        seen += 1
        if seen == 3:
            break
    assert seen >= 3  # independent random points agree on the dimension


def test_cohomology_rank_nullity_exact():
    tref = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(12)
    rho = solve_representation(tref, random_representation(tref, rng))
    dims = cohomology_dims(tref, rho)
    assert dims.h0 + dims.b1 == 3
    assert dims.h0 == stabilizer_dim(rho)


def test_cohomology_conjugation_invariant():
    tref = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(13)
    rho = solve_representation(tref, random_representation(tref, rng))
    dims = cohomology_dims(tref, rho)
    g = su2.random_group(rng)
    conj = Representation(tref.__class__(tref.generators, tref.relators)
                          if False else tref,
                          [su2.dagger(g) @ u @ g for u in rho.images])
    dims2 = cohomology_dims(tref, conj)
    assert (dims.h0, dims.z1, dims.b1, dims.h1) == (dims2.h0, dims2.z1, dims2.b1, dims2.h1)


def test_cohomology_rejects_invalid_rep():
    tref = parse_presentation("<x,y | x^2 y^-3>")
    rng = np.random.default_rng(14)
    bad = random_representation(tref, rng)
    with pytest.raises(ValueError):
        cohomology_dims(tref, bad)


def test_restriction_image_dims():
    surf = surface_presentation(2)
    rng = np.random.default_rng(15)
    rho = Representation(surf, [su2.random_group(rng), su2.IDENTITY,
                                su2.random_group(rng), su2.IDENTITY])
    assert restriction_image_dim(2, rho) == 3
    triv = Representation(surf, [su2.IDENTITY] * 4)
    assert restriction_image_dim(2, triv) == 6
    surf1 = surface_presentation(1)
    ab = Representation(surf1, [su2.exp_alg(su2.from_coords([0, 0, 1.1])),
                                su2.IDENTITY])
    assert restriction_image_dim(1, ab) == 1


def test_restriction_validates_y_killing():
    surf = surface_presentation(1)
    rng = np.random.default_rng(16)
    lam = su2.from_coords([0, 0, 0.9])
    rho = Representation(surf, [su2.exp_alg(lam), su2.exp_alg(2 * lam)])
    with pytest.raises(ValueError):
        restriction_image_dim(1, rho)


def test_enumerate_z3_no_irreducibles():
    p = bundled_presentation("z3")
    classes = enumerate_components(p, trials=40, seed=0)
    assert classes == []


def test_enumerate_trefoil_arc():
    p = bundled_presentation("trefoil")
    classes = enumerate_components(p, trials=60, seed=1)
    assert len(classes) >= 3  # samples along the one-parameter family
    for cls in classes:
        assert cls.h1 == 1
        assert cls.stabilizer_dim == 0
        # the family lies on tr x = 0, tr y = 1
        assert abs(cls.trace_key[0]) <= 1e-6
        assert abs(cls.trace_key[1] - 1.0) <= 1e-6


def test_enumerate_poincare_two_classes():
    p = bundled_presentation("poincare")
    classes = enumerate_components(p, trials=200, seed=2)
    assert len(classes) == 2
    keys = sorted(round(c.trace_key[2], 3) for c in classes)
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    assert keys == [round(-golden, 3), round(golden + 1.0, 3)]


def test_enumerate_deterministic():
    p = bundled_presentation("trefoil")
    a = enumerate_components(p, trials=25, seed=7)
    b = enumerate_components(p, trials=25, seed=7)
    assert [c.trace_key for c in a] == [c.trace_key for c in b]
    assert [c.count for c in a] == [c.count for c in b]


def test_enumerate_seed_invariance_poincare():
    p = bundled_presentation("poincare")
    a = enumerate_components(p, trials=500, seed=100)
    b = enumerate_components(p, trials=500, seed=200)
    keys_a = sorted(tuple(np.round(c.trace_key, 5)) for c in a)
    keys_b = sorted(tuple(np.round(c.trace_key, 5)) for c in b)
    assert keys_a == keys_b
