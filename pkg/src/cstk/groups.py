"""Finitely presented groups, SU(2) representation varieties, twisted H^1.

The single workhorse is the cocycle extension rule

    xi(uv) = xi(u) + Ad_{rho(u)} xi(v),    xi(g^-1) = -Ad_{rho(g)^-1} xi(g),

which serves three purposes: linearizing relators for the Levenberg-
Marquardt solver (it is the Fox-derivative Jacobian), computing the cocycle
space Z^1, and computing restriction maps between presentations.

Zariski tangent dimensions are integers, so every rank decision uses a
singular-value cutoff of 1e-8 together with a mandatory spectral-gap
diagnostic; a gap under 10x raises IllConditioned rather than returning an
untrustworthy dimension.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import su2
from .errors import IllConditioned, NonConvergence, ParseError

Word = tuple  # of (generator index, +1 | -1)

RANK_CUTOFF = 1e-8
GAP_REQUIRED = 10.0


@dataclass(frozen=True)
class Presentation:
    generators: tuple
    relators: tuple  # of Word

    def __post_init__(self):
        for w in self.relators:
            if not w:
                raise ValueError("empty relator")
            for idx, exp in w:
                if not 0 <= idx < len(self.generators):
                    raise ValueError(f"letter references generator {idx}")
                if exp not in (1, -1):
                    raise ValueError("letters must carry exponent +1 or -1")

    @property
    def n_generators(self):
        return len(self.generators)

    def word_str(self, word):
        parts = []
        for idx, exp in word:
            name = self.generators[idx]
            parts.append(name if exp == 1 else f"{name}^-1")
        return " ".join(parts)

    def __str__(self):
        gens = ",".join(self.generators)
        if not self.relators:
            return f"<{gens}>"
        rels = ", ".join(self.word_str(w) for w in self.relators)
        return f"<{gens} | {rels}>"


_TOKEN_RE = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
                       r"|(?P<int>-?\d+)"
                       r"|(?P<sym>[<>|,^\[\]()]))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos,
                             {"name", "integer", "symbol"})
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive-descent parser for `<g1,...,gk | w1, ..., wm>`.

    Words are whitespace-separated factors; a factor is a generator name, a
    commutator `[w1,w2]`, or a parenthesized word, optionally raised to an
    integer power with `^`.
    """

    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None, expected=()):
        tok = self.tokens[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2],
                             expected or ({value} if value else {kind}))
        self.i += 1
        return tok

    def parse(self):
        self.take("sym", "<", {"<"})
        gens = [self.take("name", expected={"generator name"})[1]]
        while self.peek()[:2] == ("sym", ","):
            self.take()
            gens.append(self.take("name", expected={"generator name"})[1])
        gen_index = {g: i for i, g in enumerate(gens)}
        if len(gen_index) != len(gens):
            tok = self.peek()
            raise ParseError("duplicate generator name", tok[2])
        relators = []
        if self.peek()[:2] == ("sym", "|"):
            self.take()
            relators.append(self.parse_word(gen_index))
            while self.peek()[:2] == ("sym", ","):
                self.take()
                relators.append(self.parse_word(gen_index))
        self.take("sym", ">", {">"})
        self.take("end", expected={"end of input"})
        return Presentation(tuple(gens), tuple(tuple(w) for w in relators))

    def parse_word(self, gen_index):
        word = self.parse_factor(gen_index)
        while self.peek()[0] == "name" or self.peek()[:2] in (("sym", "["), ("sym", "(")):
            word += self.parse_factor(gen_index)
        return word

    def parse_factor(self, gen_index):
        tok = self.peek()
        if tok[0] == "name":
            self.take()
            if tok[1] not in gen_index:
                raise ParseError(f"unknown generator {tok[1]!r}", tok[2],
                                 set(gen_index))
            base = [(gen_index[tok[1]], 1)]
        elif tok[:2] == ("sym", "["):
            self.take()
            u = self.parse_word(gen_index)
            self.take("sym", ",", {","})
            v = self.parse_word(gen_index)
            self.take("sym", "]", {"]"})
            base = list(u) + list(v) + _invert(u) + _invert(v)
        elif tok[:2] == ("sym", "("):
            self.take()
            base = list(self.parse_word(gen_index))
            self.take("sym", ")", {")"})
        else:
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2],
                             {"generator name", "[", "("})
        if self.peek()[:2] == ("sym", "^"):
            self.take()
            etok = self.take("int", expected={"integer exponent"})
            exp = int(etok[1])
            if exp == 0:
                raise ParseError("zero exponent makes an empty factor", etok[2])
            if exp < 0:
                base, exp = _invert(base), -exp
            base = base * exp
        return tuple(base)


def _invert(word):
    return [(idx, -exp) for idx, exp in reversed(word)]


def parse_presentation(text) -> Presentation:
    """Parse `<g1,...,gk | w1, ..., wm>`; relators omitted means free group."""
    return _Parser(text).parse()


def surface_presentation(genus) -> Presentation:
    """<x1,y1,...,xg,yg | [x1,y1]...[xg,yg]>."""
    gens = []
    for i in range(1, genus + 1):
        gens += [f"x{i}", f"y{i}"]
    relator = []
    for i in range(genus):
        x, y = 2 * i, 2 * i + 1
        relator += [(x, 1), (y, 1), (x, -1), (y, -1)]
    return Presentation(tuple(gens), (tuple(relator),))


BUNDLED_PRESENTATIONS = {
    "trefoil": "<x,y | x^2 y^-3>",
    "poincare": "<x,y | x^2 y^-3, x^2 (x y)^-5>",
    "z2": "<a,b | [a,b]>",
    "z3": "<a,b,c | [a,b], [a,c], [b,c]>",
    "free2": "<a,b>",
}


def bundled_presentation(name) -> Presentation:
    if name == "surface2":
        return surface_presentation(2)
    return parse_presentation(BUNDLED_PRESENTATIONS[name])


def eval_word(images, word) -> np.ndarray:
    """Ordered product of generator images and inverses; empty word is I."""
    out = su2.IDENTITY.copy()
    for idx, exp in word:
        out = out @ (images[idx] if exp == 1 else su2.dagger(images[idx]))
    return out


class Representation:
    """SU(2) images of the generators, with per-relator residuals.

    Residuals ||rho(w_j) - I||_F are recomputed on construction; the
    representation is flagged valid when the largest is at most 1e-8.
    """

    VALID_TOL = 1e-8

    def __init__(self, presentation: Presentation, images):
        images = [np.asarray(u, dtype=complex) for u in images]
        if len(images) != presentation.n_generators:
            raise ValueError("one image per generator required")
        self.presentation = presentation
        self.images = images
        self.residuals = [float(np.linalg.norm(eval_word(images, w) - su2.IDENTITY))
                          for w in presentation.relators]

    @property
    def max_residual(self):
        return max(self.residuals, default=0.0)

    @property
    def valid(self):
        return self.max_residual <= self.VALID_TOL

    def __call__(self, word):
        return eval_word(self.images, word)


def cocycle_of_word(rho: Representation, xi_values, word):
    """Extend a generator-valued cochain along a word by the cocycle rule.

    xi_values has shape (..., n_gens, 2, 2); leading axes are batched.  The
    extension is linear in xi and satisfies xi(g g^-1) = 0 exactly.
    """
    xi_values = np.asarray(xi_values, dtype=complex)
    batch = xi_values.shape[:-3]
    out = np.zeros(batch + (2, 2), dtype=complex)
    prefix = su2.IDENTITY.copy()
    for idx, exp in word:
        u = rho.images[idx]
        if exp == 1:
            contrib = xi_values[..., idx, :, :]
        else:
            uinv = su2.dagger(u)
            contrib = -(uinv @ xi_values[..., idx, :, :] @ u)
        out = out + prefix @ contrib @ su2.dagger(prefix)
        prefix = prefix @ (u if exp == 1 else su2.dagger(u))
    return out


@dataclass
class SolveOpts:
    tol: float = 1e-10
    max_iters: int = 200
    lam0: float = 1e-3


def _residual_vector(pres, images):
    parts = [(eval_word(images, w) - su2.IDENTITY).ravel() for w in pres.relators]
    vec = np.concatenate(parts)
    return np.concatenate([vec.real, vec.imag])


def _basis_directions(images):
    """Cocycle directions of right-multiplication steps: xi_i = Ad_{rho(x_i)} e_k."""
    n = len(images)
    dirs = np.zeros((3 * n, n, 2, 2), dtype=complex)
    for i in range(n):
        for k in range(3):
            dirs[3 * i + k, i] = images[i] @ su2.E_BASIS[k] @ su2.dagger(images[i])
    return dirs


def solve_representation(pres: Presentation, seed_rep: Representation,
                         opts: SolveOpts | None = None) -> Representation:
    """Levenberg-Marquardt on rho -> (rho(w_j) - I)_j.

    Updates multiply each image on the right by exp of an algebra step, so
    iterates stay on the group without charts; the Jacobian comes from the
    cocycle extension rule.  Raises NonConvergence with the final residual.
    """
    opts = opts or SolveOpts()
    images = [u.copy() for u in seed_rep.images]
    if not pres.relators or Representation(pres, images).max_residual <= opts.tol:
        return Representation(pres, images)
    lam = opts.lam0
    r = _residual_vector(pres, images)
    for _ in range(opts.max_iters):
        rho = Representation(pres, images)
        if rho.max_residual <= opts.tol:
            return rho
        dirs = _basis_directions(images)
        cols = []
        for w in pres.relators:
            rw = eval_word(images, w)
            dw = cocycle_of_word(rho, dirs, w) @ rw   # (3n, 2, 2)
            cols.append(dw.reshape(len(dirs), 4))
        jc = np.concatenate(cols, axis=1)             # complex (3n, 4m)
        jac = np.concatenate([jc.real, jc.imag], axis=1).T  # (8m, 3n)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        improved = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(len(jtj)), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = [img @ su2.exp_alg(su2.from_coords(delta[3 * i:3 * i + 3]))
                     for i, img in enumerate(images)]
            r_trial = _residual_vector(pres, trial)
            if np.linalg.norm(r_trial) < np.linalg.norm(r):
                images, r = trial, r_trial
                lam = max(lam / 3.0, 1e-14)
                improved = True
                break
            lam *= 2.5
            if lam > 1e12:
                break
        if not improved:
            break
    rho = Representation(pres, images)
    if rho.max_residual <= opts.tol:
        return rho
    raise NonConvergence("representation solve stalled",
                         residual=rho.max_residual, iterate=rho)


def random_representation(pres: Presentation, rng) -> Representation:
    return Representation(pres, list(su2.random_group(rng, shape=(pres.n_generators,))))


_CENTRAL_TOL = 1e-8


def _is_central(u):
    return np.linalg.norm(u - 0.5 * np.trace(u) * su2.IDENTITY) <= _CENTRAL_TOL


def normalize_conjugacy(rho: Representation) -> Representation:
    """Conjugate to a normal form: first non-central image diagonal with
    upper-left e^{i phi}, phi in [0, pi]; next non-commuting image with real
    nonnegative upper-right entry.  Idempotent; collapses conjugation orbits.
    """
    images = [u.copy() for u in rho.images]
    pivot = next((u for u in images if not _is_central(u)), None)
    if pivot is None:
        return Representation(rho.presentation, images)
    phi = np.arccos(np.clip(0.5 * np.real(np.trace(pivot)), -1.0, 1.0))
    lam = np.exp(1j * phi)
    # eigenvector of the pivot for e^{i phi}: take the larger of the two
    # adjugate columns, then make its largest component real positive so an
    # already-diagonal pivot maps to the identity frame
    v1 = np.array([pivot[0, 1], lam - pivot[0, 0]])
    v2 = np.array([lam - pivot[1, 1], pivot[1, 0]])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    v = v / np.linalg.norm(v)
    j = int(np.argmax(np.abs(v)))
    v = v * np.exp(-1j * np.angle(v[j]))
    g = np.array([[v[0], -np.conj(v[1])], [v[1], np.conj(v[0])]])
    images = [su2.dagger(g) @ u @ g for u in images]
    # residual torus freedom: fix the phase on the next off-diagonal image
    for u in images:
        if abs(u[0, 1]) > _CENTRAL_TOL:
            psi = 0.5 * np.angle(u[0, 1])
            t = np.array([[np.exp(1j * psi), 0], [0, np.exp(-1j * psi)]])
            images = [su2.dagger(t) @ w @ t for w in images]
            break
    return Representation(rho.presentation, [su2.unitarize(u) for u in images])


def _rank_with_gap(matrix, cutoff=RANK_CUTOFF):
    """(rank, gap) with gap = smallest kept / largest dropped singular value."""
    if matrix.size == 0:
        return 0, np.inf
    sv = np.linalg.svd(matrix, compute_uv=False)
    kept = sv[sv > cutoff]
    dropped = sv[sv <= cutoff]
    rank = len(kept)
    if len(kept) == 0 or len(dropped) == 0:
        return rank, np.inf
    largest_dropped = dropped[0]
    if largest_dropped == 0.0:
        return rank, np.inf
    return rank, float(kept[-1] / largest_dropped)


def stabilizer_dim(rho: Representation, cutoff=RANK_CUTOFF) -> int:
    """dim { v in su(2) : Ad_{rho(x_i)} v = v for all i }.

    0 = irreducible, 1 = abelian image (reducible), 3 = central.
    """
    blocks = [su2.ad_matrix(u) - np.eye(3) for u in rho.images]
    stacked = np.vstack(blocks) if blocks else np.zeros((0, 3))
    rank, gap = _rank_with_gap(stacked, cutoff)
    if gap < GAP_REQUIRED:
        raise IllConditioned("stabilizer rank", gap)
    return 3 - rank


def coboundary_matrix(rho: Representation):
    """Matrix of delta^0: v -> (Ad_{rho(x_i)} v - v)_i in basis coordinates."""
    n = rho.presentation.n_generators
    mat = np.zeros((3 * n, 3))
    for i, u in enumerate(rho.images):
        mat[3 * i:3 * i + 3] = su2.ad_matrix(u) - np.eye(3)
    return mat


def cocycle_matrix(rho: Representation):
    """Matrix whose kernel is Z^1: stacked relator conditions on xi."""
    pres = rho.presentation
    n = pres.n_generators
    dirs = np.zeros((3 * n, n, 2, 2), dtype=complex)
    for i in range(n):
        for k in range(3):
            dirs[3 * i + k, i] = su2.E_BASIS[k]
    rows = []
    for w in pres.relators:
        vals = cocycle_of_word(rho, dirs, w)      # (3n, 2, 2)
        rows.append(su2.coords(vals).T)           # (3, 3n)
    return np.vstack(rows) if rows else np.zeros((0, 3 * n))


@dataclass
class CohomologyDims:
    h0: int
    z1: int
    b1: int
    h1: int
    gaps: dict = field(default_factory=dict)


def cohomology_dims(pres: Presentation, rho: Representation,
                    cutoff=RANK_CUTOFF) -> CohomologyDims:
    """Twisted cohomology dimensions at rho.

    Z^1 is the kernel of the relator linearization, B^1 the image of
    delta^0; h0 = 3 - b1 by rank-nullity, h1 = z1 - b1.  Raises
    IllConditioned if any singular-value gap at the cutoff is under 10x.
    """
    if not rho.valid:
        raise ValueError(f"representation residual {rho.max_residual:.2e} too large")
    n = pres.n_generators
    zmat = cocycle_matrix(rho)
    z_rank, z_gap = _rank_with_gap(zmat, cutoff)
    bmat = coboundary_matrix(rho)
    b1, b_gap = _rank_with_gap(bmat, cutoff)
    gap = min(z_gap, b_gap)
    if gap < GAP_REQUIRED:
        raise IllConditioned("cohomology ranks", gap)
    z1 = 3 * n - z_rank
    return CohomologyDims(h0=3 - b1, z1=z1, b1=b1, h1=z1 - b1,
                          gaps={"z1": z_gap, "b1": b_gap})


def restriction_image_dim(genus: int, rho: Representation,
                          cutoff=RANK_CUTOFF) -> int:
    """dim im[ H^1(handlebody) -> H^1(boundary surface) ].

    rho is a representation of the genus-g surface group that kills the
    y-generators (the standard handlebody inclusion sends x_i to the free
    generators and y_i to 1).  Free-group cocycles lift to surface cocycles
    with zero y-slots; the dimension of their span modulo coboundaries is
    rank([lift | B]) - rank(B).
    """
    pres = surface_presentation(genus)
    if rho.presentation != pres:
        raise ValueError("expected the bundled genus-%d surface presentation" % genus)
    for i in range(genus):
        y_img = rho.images[2 * i + 1]
        if np.linalg.norm(y_img - su2.IDENTITY) > 1e-8:
            raise ValueError("representation does not kill the y-generators")
    n = pres.n_generators
    lift = np.zeros((3 * n, 3 * genus))
    for i in range(genus):
        x_slot = 2 * i
        lift[3 * x_slot:3 * x_slot + 3, 3 * i:3 * i + 3] = np.eye(3)
    bmat = coboundary_matrix(rho)
    rank_b, gap_b = _rank_with_gap(bmat, cutoff)
    joint = np.hstack([lift, bmat])
    rank_joint, gap_j = _rank_with_gap(joint, cutoff)
    gap = min(gap_b, gap_j)
    if gap < GAP_REQUIRED:
        raise IllConditioned("restriction ranks", gap)
    return rank_joint - rank_b


@dataclass
class ComponentClass:
    trace_key: tuple
    count: int
    h1: int
    stabilizer_dim: int
    representative: Representation


def _trace_key(rho: Representation):
    n = rho.presentation.n_generators
    traces = [float(np.real(np.trace(rho.images[i]))) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            traces.append(float(np.real(np.trace(rho.images[i] @ rho.images[j]))))
    return tuple(traces)


def _clearly_irreducible(rho: Representation, comm_floor: float = 1e-3):
    """Some pair of images fails to commute by a margin.

    An SU(2) representation is irreducible iff its images share no axis,
    i.e. some pairwise commutator is nonzero.  Near reducible loci the
    relator residual is quartically flat, so solver output can sit ~1e-4
    away from an abelian point while passing the residual tolerance; the
    commutator floor rejects those reducible-limit artifacts.
    """
    n = len(rho.images)
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            best = max(best, float(np.linalg.norm(
                su2.bracket(rho.images[i], rho.images[j]))))
    return best > comm_floor


def enumerate_components(pres: Presentation, trials: int, seed: int,
                         cluster_tol: float = 1e-6) -> list:
    """Multi-start solve + conjugacy normalization + trace clustering.

    Returns the distinct irreducible classes found (possibly empty), each
    with its hit count, h1 and stabilizer dimension.  Deterministic for a
    fixed seed; class list is sorted by trace key.
    """
    rng = np.random.default_rng(seed)
    classes = []
    for _ in range(trials):
        seed_rep = random_representation(pres, rng)
        try:
            rho = solve_representation(pres, seed_rep)
        except NonConvergence:
            continue
        if not _clearly_irreducible(rho):
            continue
        try:
            stab = stabilizer_dim(rho)
        except IllConditioned:
            continue
        if stab != 0:
            continue
        rho = normalize_conjugacy(rho)
        key = _trace_key(rho)
        hit = None
        for cls in classes:
            if max(abs(a - b) for a, b in zip(cls.trace_key, key)) <= cluster_tol:
                hit = cls
                break
        if hit is None:
            try:
                h1 = cohomology_dims(pres, rho).h1
            except IllConditioned:
                continue
            classes.append(ComponentClass(trace_key=key, count=1, h1=h1,
                                          stabilizer_dim=stab, representative=rho))
        else:
            hit.count += 1
    classes.sort(key=lambda c: c.trace_key)
    return classes
