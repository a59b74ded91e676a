"""File formats: binary field files, text loop files, representation files.

Field file layout: the 5-byte magic "CSTK1", then little-endian int32 header
(dim, shape..., degree, value kind), then the payload as little-endian
float64 in storage order.  Value kinds: 0 = scalar (ncomp, *shape),
1 = algebra (ncomp, *shape, 3 basis coordinates), 2 = group
(*shape, 4 quaternion components).
"""

from __future__ import annotations

import struct

import numpy as np

from . import su2
from .forms import AlgebraForm, ScalarForm, TorusGrid, multi_indices
from .gauge import GaugeMap
from .groups import Presentation, Representation, parse_presentation

MAGIC = b"CSTK1"
KIND_SCALAR, KIND_ALGEBRA, KIND_GROUP = 0, 1, 2


def write_field(path, obj):
    """Write a ScalarForm, AlgebraForm or GaugeMap."""
    if isinstance(obj, AlgebraForm):
        kind, degree = KIND_ALGEBRA, obj.degree
        payload = su2.coords(obj.data)
    elif isinstance(obj, ScalarForm):
        kind, degree = KIND_SCALAR, obj.degree
        payload = obj.data
    elif isinstance(obj, GaugeMap):
        kind, degree = KIND_GROUP, 0
        payload = su2.quaternion(obj.values)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    grid = obj.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        header = [grid.dim, *grid.shape, degree, kind]
        fh.write(struct.pack(f"<{len(header)}i", *header))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field file (magic {magic!r})")
        dim, = struct.unpack("<i", fh.read(4))
        shape = struct.unpack(f"<{dim}i", fh.read(4 * dim))
        degree, kind = struct.unpack("<2i", fh.read(8))
        grid = TorusGrid(shape)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    ncomp = len(multi_indices(dim, degree))
    if kind == KIND_SCALAR:
        return ScalarForm(grid, degree, raw.reshape((ncomp,) + shape))
    if kind == KIND_ALGEBRA:
        coords = raw.reshape((ncomp,) + shape + (3,))
        return AlgebraForm(grid, degree, su2.from_coords(coords))
    if kind == KIND_GROUP:
        quat = raw.reshape(shape + (4,))
        return GaugeMap(grid, su2.from_quaternion(quat), check_smooth=False)
    raise ValueError(f"{path}: unknown value kind {kind}")


def write_matrix_triplets(path, op):
    """Coordinate-triplet text dump of an OperatorMatrix for external checks.

    One `row col value` line per stored entry, preceded by a `dim nnz`
    header; rows and columns are 0-based.
    """
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"{op.dim} {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")


def read_matrix_triplets(path):
    import scipy.sparse as sp
    with open(path) as fh:
        dim, nnz = (int(x) for x in fh.readline().split())
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            r, c, v = fh.readline().split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def write_loop(path, loop):
    """Plain text: header line `dim w1 ... wd`, one sample point per line."""
    with open(path, "w") as fh:
        fh.write(" ".join([str(loop.dim)] + [str(int(w)) for w in loop.winding]) + "\n")
        for point in loop.samples:
            fh.write(" ".join(f"{x:.17g}" for x in point) + "\n")


def read_loop(path):
    from .holonomy import LoopPath
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split()
    dim = int(header[0])
    declared = [int(w) for w in header[1:]]
    if len(declared) != dim:
        raise ValueError(f"{path}: header winding has {len(declared)} entries for dim {dim}")
    samples = np.array([[float(x) for x in ln.split()] for ln in lines[1:]])
    loop = LoopPath(samples)
    if list(loop.winding) != declared:
        raise ValueError(f"{path}: declared winding {declared} != samples' {list(loop.winding)}")
    return loop


def write_representation(path, rho: Representation):
    """Structured text: the presentation, then one quaternion per generator."""
    with open(path, "w") as fh:
        fh.write(f"presentation = {rho.presentation}\n")
        for name, image in zip(rho.presentation.generators, rho.images):
            q = su2.quaternion(image)
            fh.write(f"{name} = " + " ".join(f"{x:.17g}" for x in q) + "\n")


def read_representation(path, presentation: Presentation | None = None):
    images_by_name = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "presentation":
                if presentation is None:
                    presentation = parse_presentation(value)
            else:
                q = np.array([float(x) for x in value.split()])
                images_by_name[key] = su2.from_quaternion(q / np.linalg.norm(q))
    if presentation is None:
        raise ValueError(f"{path}: no presentation line and none supplied")
    images = [images_by_name[name] for name in presentation.generators]
    return Representation(presentation, images)
