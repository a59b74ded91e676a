"""Discrete exterior calculus on flat periodic tori T^d, d in {2, 3, 4}.

Forms live on a collocated periodic grid over the unit torus (volume 1,
spacing h_i = 1/n_i).  A degree-k form stores one value per strictly
increasing multi-index I in {0..d-1} per site; algebra-valued forms carry a
2x2 su(2) matrix per value, scalar forms a real.

Differentiation uses second-order central differences.  On this grid d.d = 0
and summation by parts are exact (rolls of a periodic array telescope), which
the Chern-Simons gradient identity depends on at machine precision.

No operation mutates its inputs; forms behave as values and are safe to
share across threads.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from . import su2
from .errors import DegreeMismatch, DegreeTooHigh, GridMismatch


class TorusGrid:
    """Uniform periodic grid on the unit torus.

    shape: per-axis site counts (n_1, ..., n_d), each >= 4; spacing is
    h_i = 1/n_i so spacing * shape = 1 per axis exactly.
    """

    def __init__(self, shape):
        shape = tuple(int(n) for n in shape)
        if len(shape) not in (2, 3, 4):
            raise ValueError(f"grid dimension must be 2, 3 or 4, got {len(shape)}")
        if any(n < 4 for n in shape):
            raise ValueError(f"every axis needs at least 4 sites, got {shape}")
        self.shape = shape
        self.dim = len(shape)
        self.spacing = tuple(1.0 / n for n in shape)

    @property
    def sites(self):
        return int(np.prod(self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axis_coords(self, axis):
        """Site coordinates along one axis: 0, h, 2h, ..."""
        return np.arange(self.shape[axis]) * self.spacing[axis]

    def mesh(self):
        """List of d coordinate arrays of shape `shape` (indexing='ij')."""
        return np.meshgrid(*(self.axis_coords(a) for a in range(self.dim)), indexing='ij')

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and self.shape == other.shape

    def __hash__(self):
        return hash(self.shape)

    def __repr__(self):
        return f"TorusGrid{self.shape}"


def multi_indices(dim, degree):
    """Strictly increasing degree-tuples over {0..dim-1}, in lexicographic order."""
    return tuple(combinations(range(dim), degree))


def merge_sign(i_tuple, j_tuple):
    """Sign of sorting the concatenation (I, J); None if they overlap.

    Returns (sorted tuple, +/-1).
    """
    merged = i_tuple + j_tuple
    if len(set(merged)) != len(merged):
        return None, 0
    inversions = sum(1 for a in range(len(merged)) for b in range(a + 1, len(merged))
                     if merged[a] > merged[b])
    return tuple(sorted(merged)), -1 if inversions % 2 else 1


def insert_sign(j, i_tuple):
    """Sign (-1)^{#{i in I : i < j}} of inserting axis j into sorted I."""
    return -1 if sum(1 for i in i_tuple if i < j) % 2 else 1


class _Form:
    value_shape = ()

    def __init__(self, grid, degree, data):
        if not 0 <= degree <= grid.dim:
            raise DegreeTooHigh(f"degree {degree} out of range on {grid}")
        self.grid = grid
        self.degree = degree
        self.indices = multi_indices(grid.dim, degree)
        expected = (len(self.indices),) + grid.shape + self.value_shape
        data = np.asarray(data)
        if data.shape != expected:
            raise ValueError(f"data shape {data.shape}, expected {expected}")
        self.data = data

    def component(self, i_tuple):
        return self.data[self.indices.index(tuple(i_tuple))]

    def copy(self):
        return type(self)(self.grid, self.degree, self.data.copy())

    def _check_same(self, other):
        if self.grid != other.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")
        if self.degree != other.degree:
            raise DegreeMismatch(f"degree {self.degree} vs {other.degree}")

    def __add__(self, other):
        self._check_same(other)
        return type(self)(self.grid, self.degree, self.data + other.data)

    def __sub__(self, other):
        self._check_same(other)
        return type(self)(self.grid, self.degree, self.data - other.data)

    def __mul__(self, scalar):
        return type(self)(self.grid, self.degree, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, self.degree, -self.data)

    def max_norm(self):
        """Max over sites and components of the pointwise Frobenius norm."""
        flat = self.data.reshape((-1,) + self.value_shape)
        if self.value_shape:
            return float(np.max(np.linalg.norm(flat, axis=(-2, -1)))) if flat.size else 0.0
        return float(np.max(np.abs(flat))) if flat.size else 0.0


class AlgebraForm(_Form):
    """su(2)-valued degree-k form; data shape (ncomp, *grid.shape, 2, 2)."""

    value_shape = (2, 2)

    @classmethod
    def zeros(cls, grid, degree):
        n = len(multi_indices(grid.dim, degree))
        return cls(grid, degree, np.zeros((n,) + grid.shape + (2, 2), dtype=complex))

    @classmethod
    def from_components(cls, grid, degree, comps):
        """Build from a {multi-index tuple: (*shape, 2, 2) array} mapping."""
        form = cls.zeros(grid, degree)
        for idx, val in comps.items():
            form.data[form.indices.index(tuple(idx))] = val
        return form


class ScalarForm(_Form):
    """Real-valued degree-k form; data shape (ncomp, *grid.shape)."""

    value_shape = ()

    @classmethod
    def zeros(cls, grid, degree):
        n = len(multi_indices(grid.dim, degree))
        return cls(grid, degree, np.zeros((n,) + grid.shape))

    @classmethod
    def from_components(cls, grid, degree, comps):
        form = cls.zeros(grid, degree)
        for idx, val in comps.items():
            form.data[form.indices.index(tuple(idx))] = val
        return form


def central_diff(data, grid, axis):
    """Second-order central difference along a grid axis.

    `data` has the component axis first, so grid axis j is array axis j+1.
    """
    ax = axis + 1
    return (np.roll(data, -1, axis=ax) - np.roll(data, 1, axis=ax)) / (2.0 * grid.spacing[axis])


def exterior_d(form):
    """Discrete exterior derivative; d.d = 0 exactly (differences commute)."""
    grid = form.grid
    if form.degree >= grid.dim:
        raise DegreeTooHigh(f"cannot raise degree {form.degree} on {grid}")
    out = type(form).zeros(grid, form.degree + 1)
    out_index = {idx: k for k, idx in enumerate(out.indices)}
    for src_k, i_tuple in enumerate(form.indices):
        diffs = {j: central_diff(form.data[src_k:src_k + 1], grid, j)[0]
                 for j in range(grid.dim) if j not in i_tuple}
        for j, dval in diffs.items():
            merged, sign = merge_sign((j,), i_tuple)
            out.data[out_index[merged]] += sign * dval
    return out


def _wedge(alpha, beta, value_op, out_cls):
    # Terms for each output component are accumulated in an order keyed by the
    # unordered index pair, so that [a^b] = -(-1)^{pq}[b^a] (and the pairing
    # analog) hold bitwise, not just to rounding.
    grid = alpha.grid
    if grid != beta.grid:
        raise GridMismatch(f"{grid} vs {beta.grid}")
    p, q = alpha.degree, beta.degree
    if p + q > grid.dim:
        raise DegreeTooHigh(f"wedge degree {p}+{q} exceeds dim {grid.dim}")
    out = out_cls.zeros(grid, p + q)
    out_index = {idx: k for k, idx in enumerate(out.indices)}
    terms = {}
    for ia, i_tuple in enumerate(alpha.indices):
        for ib, j_tuple in enumerate(beta.indices):
            merged, sign = merge_sign(i_tuple, j_tuple)
            if merged is None:
                continue
            key = tuple(sorted((i_tuple, j_tuple)))
            terms.setdefault(out_index[merged], []).append((key, sign, ia, ib))
    for dst, contribs in terms.items():
        contribs.sort(key=lambda t: t[0])
        acc = None
        for _, sign, ia, ib in contribs:
            val = sign * value_op(alpha.data[ia], beta.data[ib])
            acc = val if acc is None else acc + val
        out.data[dst] = acc
    return out


def wedge_bracket(alpha, beta):
    """[alpha ^ beta]: shuffle expansion with the Lie bracket on values.

    Satisfies [a^b] = -(-1)^{pq} [b^a] exactly.
    """
    return _wedge(alpha, beta, su2.bracket, AlgebraForm)


def wedge_pair(alpha, beta):
    """<alpha ^ beta>: shuffle expansion with the invariant pairing on values."""
    return _wedge(alpha, beta, su2.pair, ScalarForm)


_STAR_CACHE = {}


def _star_table(dim, degree):
    key = (dim, degree)
    if key not in _STAR_CACHE:
        src = multi_indices(dim, degree)
        dst = multi_indices(dim, dim - degree)
        table = []
        for i_tuple in src:
            comp = tuple(a for a in range(dim) if a not in i_tuple)
            _, sign = merge_sign(i_tuple, comp)
            table.append((dst.index(comp), sign))
        _STAR_CACHE[key] = table
    return _STAR_CACHE[key]


def hodge_star(form):
    """Hodge star for the flat metric, standard orientation dx_1^...^dx_d.

    Pure index shuffling with signs; ** = (-1)^{k(d-k)} exactly.
    """
    grid = form.grid
    out = type(form).zeros(grid, grid.dim - form.degree)
    for src_k, (dst_k, sign) in enumerate(_star_table(grid.dim, form.degree)):
        out.data[dst_k] = sign * form.data[src_k]
    return out


def integrate(form):
    """Riemann sum of a top-degree scalar form: h_1...h_d * sum over sites."""
    if form.degree != form.grid.dim:
        raise DegreeMismatch(f"integrate needs degree {form.grid.dim}, got {form.degree}")
    return float(form.grid.cell_volume * np.sum(form.data[0]))


def l2_inner(alpha, beta):
    """L2 inner product  2 * integral of <alpha ^ *beta>."""
    if alpha.grid != beta.grid:
        raise GridMismatch(f"{alpha.grid} vs {beta.grid}")
    if alpha.degree != beta.degree:
        raise DegreeMismatch(f"degree {alpha.degree} vs {beta.degree}")
    return 2.0 * integrate(wedge_pair(alpha, hodge_star(beta)))


def codifferential(form, connection=None):
    """Exact adjoint of the covariant derivative with respect to l2_inner.

    For d_A on degree k (see gauge.covariant_d) the adjoint acting on a
    (k+1)-form is assembled from the transposed stencils: central differences
    are skew (roll transposes exactly), ad_{A_j} is skew under the pairing, so

        (d_A* w)_I = - sum_{j not in I} sign(j, I) (D_j + [A_j, .]) w_{I u {j}}.

    The L2 weights are uniform across degrees on the unit torus, hence cancel.
    """
    grid = form.grid
    if form.degree < 1:
        raise DegreeMismatch("codifferential needs degree >= 1")
    if connection is not None and connection.grid != grid:
        raise GridMismatch(f"{grid} vs {connection.grid}")
    out = type(form).zeros(grid, form.degree - 1)
    src_index = {idx: k for k, idx in enumerate(form.indices)}
    for dst_k, i_tuple in enumerate(out.indices):
        acc = np.zeros_like(out.data[dst_k])
        for j in range(grid.dim):
            if j in i_tuple:
                continue
            merged, _ = merge_sign((j,), i_tuple)
            w = form.data[src_index[merged]]
            term = central_diff(w[None], grid, j)[0]
            if connection is not None:
                term = term + su2.bracket(connection.data[j], w)
            acc -= insert_sign(j, i_tuple) * term
        out.data[dst_k] = acc
    return out


def random_algebra_form(grid, degree, rng, modes=3, scale=1.0, kmax=2):
    """Smooth random algebra-valued form from a few low Fourier modes.

    Smooth at grid scale by construction, so O(h^2) convergence statements
    apply to it.  At least three modes are needed for the values to span all
    of su(2); fields confined to a 2-plane make triple-product
    integrands (Chern-Simons cubic term, WZW) vanish identically.
    """
    mesh = grid.mesh()
    form = AlgebraForm.zeros(grid, degree)
    for k in range(len(form.indices)):
        field = np.zeros(grid.shape + (3,))
        for _ in range(modes):
            kvec = rng.integers(-kmax, kmax + 1, size=grid.dim)
            phase = rng.uniform(0, 2 * np.pi)
            coeff = rng.normal(0, scale, size=3)
            wave = np.cos(2 * np.pi * sum(kvec[a] * mesh[a] for a in range(grid.dim)) + phase)
            field += wave[..., None] * coeff
        form.data[k] = su2.from_coords(field)
    return form
