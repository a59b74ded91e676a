"""Batch command-line front end.

Subcommands map one-to-one onto module operations:

    cs eval | gauge-shift | degree | chern-weil
    gauge flatten
    hol loop | rep
    rep solve | cohomology | count
    lines cocycle-check | pt | cylinder-cs
    spec kernel | flow | eta

All randomness flows from --seed, so identical argv produce byte-identical
output.  Exit codes: 0 success, 2 validation/usage error, 3 solver
non-convergence (reported as structured JSON).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import su2
from .cs import bump_gauge_map, chern_weil_check, cs, degree, gauge_shift
from .errors import CstkError, NonConvergence
from .forms import AlgebraForm, TorusGrid, random_algebra_form
from .gauge import FlatOpts, GaugeMap, find_flat, flatness_residual, gauge_act
from .groups import (bundled_presentation, BUNDLED_PRESENTATIONS,
                     cohomology_dims, enumerate_components, normalize_conjugacy,
                     parse_presentation, random_representation,
                     solve_representation, surface_presentation)
from .holonomy import holonomy, holonomy_rep
from .io import (read_field, read_loop, read_representation, write_field,
                 write_representation)
from .lines import (ConnectionPath, c_sigma, c_sigma_product, cylinder_cs,
                    parallel_transport)
from .spectral import assemble_D, discrete_eta, eigen, spectral_flow

DEFAULT_SEED = 12345


# ---------------------------------------------------------------------------
# output rendering: stable key order, floats at 17 significant digits

def _render_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        text = format(float(value), ".17g")
        if not any(ch in text for ch in ".einf"):
            text += ".0"  # keep the float type through a JSON round trip
        return text
    if isinstance(value, str):
        import json
        return json.dumps(value)
    if isinstance(value, complex):
        raise TypeError("split complex values into _re/_im fields")
    if isinstance(value, dict):
        inner = ", ".join(f"{_render_value(str(k))}: {_render_value(v)}"
                          for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_render_value(v) for v in value) + "]"
    if value is None:
        return "null"
    raise TypeError(f"cannot render {type(value).__name__}")


def emit(report, fmt="json") -> bytes:
    """Serialize a report dict (or list of dicts) as JSON or CSV."""
    if fmt == "json":
        return (_render_value(report) + "\n").encode()
    if fmt == "csv":
        rows = report if isinstance(report, list) else [report]
        if not rows:
            return b"\n"
        header = list(rows[0].keys())
        lines = [",".join(header)]
        for row in rows:
            cells = []
            for key in header:
                val = row.get(key)
                if isinstance(val, (list, tuple, np.ndarray)):
                    cells.append(";".join(_render_value(v) for v in val))
                elif isinstance(val, str):
                    cells.append(val)
                else:
                    cells.append(_render_value(val))
            lines.append(",".join(cells))
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")


def _write_output(args, report):
    data = emit(report, "csv" if args.format == "csv" else "json")
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)


# ---------------------------------------------------------------------------
# input resolution

def _parse_grid(text, dim):
    if text is None:
        raise SystemExit2("--grid is required for generated inputs")
    parts = [int(p) for p in str(text).split(",")]
    if len(parts) == 1:
        parts = parts * dim
    if len(parts) != dim:
        raise SystemExit2(f"--grid needs 1 or {dim} entries, got {len(parts)}")
    return TorusGrid(tuple(parts))


class SystemExit2(SystemExit):
    def __init__(self, message):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(2)


def _resolve_connection(spec, args, dim):
    """--connection accepts `zero`, `constant:...`, `random`, or a file path."""
    if spec is None:
        raise SystemExit2("--connection is required")
    if spec == "zero":
        return AlgebraForm.zeros(_parse_grid(args.grid, dim), 1)
    if spec.startswith("constant:"):
        grid = _parse_grid(args.grid, dim)
        groups = spec[len("constant:"):].split(";")
        if len(groups) != dim:
            raise SystemExit2(f"--connection constant: needs {dim} "
                              f"semicolon-separated coordinate triples")
        conn = AlgebraForm.zeros(grid, 1)
        for j, grp in enumerate(groups):
            coords = [float(x) for x in grp.split(",")]
            if len(coords) != 3:
                raise SystemExit2("--connection constant: each group needs 3 reals")
            conn.data[j] = su2.from_coords(coords)
        return conn
    if spec == "random":
        grid = _parse_grid(args.grid, dim)
        rng = np.random.default_rng(args.seed)
        return random_algebra_form(grid, 1, rng, scale=0.3, kmax=1)
    conn = read_field(spec)
    if not isinstance(conn, AlgebraForm) or conn.degree != 1:
        raise SystemExit2(f"--connection file {spec} does not hold a connection")
    if conn.grid.dim != dim:
        raise SystemExit2(f"--connection lives on T^{conn.grid.dim}, need T^{dim}")
    return conn


def _resolve_gauge(spec, args, grid):
    if spec is None:
        raise SystemExit2("--gauge is required")
    if spec == "bump-degree-1":
        return bump_gauge_map(grid)
    if spec == "identity":
        return GaugeMap.identity(grid)
    gmap = read_field(spec)
    if not isinstance(gmap, GaugeMap):
        raise SystemExit2(f"--gauge file {spec} does not hold a gauge map")
    if gmap.grid != grid:
        raise SystemExit2("--gauge grid does not match --connection grid")
    return gmap


def _resolve_presentation(text):
    if text is None:
        raise SystemExit2("--presentation is required")
    if text in BUNDLED_PRESENTATIONS or text == "surface2":
        return bundled_presentation(text)
    return parse_presentation(text)


def _path_connections(directory, dim):
    files = sorted(Path(directory).iterdir())
    conns = []
    for f in files:
        if not f.is_file():
            continue
        obj = read_field(str(f))
        if not isinstance(obj, AlgebraForm) or obj.degree != 1:
            raise SystemExit2(f"--path entry {f.name} is not a connection")
        conns.append(obj)
    if len(conns) < 2:
        raise SystemExit2("--path needs at least two connection files")
    if any(c.grid != conns[0].grid for c in conns):
        raise SystemExit2("--path connections live on different grids")
    if conns[0].grid.dim != dim:
        raise SystemExit2(f"--path connections live on T^{conns[0].grid.dim}, "
                          f"need T^{dim}")
    return conns


# ---------------------------------------------------------------------------
# handlers

def _cmd_cs_eval(args):
    conn = _resolve_connection(args.connection, args, 3)
    return {"cs": cs(conn)}


def _cmd_cs_gauge_shift(args):
    conn = _resolve_connection(args.connection, args, 3)
    args.grid = args.grid or ",".join(str(n) for n in conn.grid.shape)
    gmap = _resolve_gauge(args.gauge, args, conn.grid)
    rep = gauge_shift(conn, gmap)
    return {"cs_value": rep.value, "gauge_shift": rep.gauge_shift,
            "nearest_integer": rep.nearest_integer, "residual": rep.residual}


def _cmd_cs_degree(args):
    grid = _parse_grid(args.grid, 3)
    gmap = _resolve_gauge(args.gauge, args, grid)
    r, k = degree(gmap)
    return {"degree_real": r, "degree": k}


def _cmd_cs_chern_weil(args):
    conn = _resolve_connection(args.connection, args, 4)
    rep = chern_weil_check(conn)
    return {"residual_max": rep.residual_max,
            "integral_defect": rep.integral_defect}


def _cmd_gauge_flatten(args):
    conn = _resolve_connection(args.connection, args, 3)
    opts = FlatOpts(tol=args.tol, max_iters=args.max_iters)
    flat = find_flat(conn, opts)
    if args.out_field:
        write_field(args.out_field, flat)
    return {"residual": flatness_residual(flat), "tol": args.tol}


def _cmd_hol_loop(args):
    conn = _resolve_connection(args.connection, args, 3)
    loop = read_loop(args.loop)
    u = holonomy(conn, loop, steps=args.steps)
    q = su2.quaternion(u)
    return {"quaternion": list(q),
            "matrix_re": [list(np.real(u[i])) for i in range(2)],
            "matrix_im": [list(np.imag(u[i])) for i in range(2)]}


def _cmd_hol_rep(args):
    conn = _resolve_connection(args.connection, args, 3)
    hols = holonomy_rep(conn, steps=args.steps, flat_tol=args.flat_tol)
    return {"holonomies": [list(su2.quaternion(u)) for u in hols]}


def _cmd_rep_solve(args):
    pres = _resolve_presentation(args.presentation)
    rng = np.random.default_rng(args.seed)
    seeds = [random_representation(pres, rng) for _ in range(args.trials)]

    def _try_solve(seed_rep):
        try:
            return solve_representation(pres, seed_rep)
        except NonConvergence:
            return None

    if args.jobs and args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            solved = list(pool.map(_try_solve, seeds))
    else:
        solved = [_try_solve(s) for s in seeds]
    solutions = []
    seen = []
    for rho in solved:
        if rho is None:
            continue
        rho = normalize_conjugacy(rho)
        key = tuple(float(np.real(np.trace(u))) for u in rho.images)
        if any(max(abs(a - b) for a, b in zip(key, k)) <= 1e-6 for k in seen):
            continue
        seen.append(key)
        solutions.append({
            "images": {name: list(su2.quaternion(u))
                       for name, u in zip(pres.generators, rho.images)},
            "max_residual": rho.max_residual,
        })
    return {"presentation": str(pres), "solutions": solutions}


def _cmd_rep_cohomology(args):
    pres = _resolve_presentation(args.presentation)
    rho = read_representation(args.rep, pres)
    dims = cohomology_dims(pres, rho)
    return {"h0": dims.h0, "z1": dims.z1, "b1": dims.b1, "h1": dims.h1,
            "gap_z1": dims.gaps["z1"], "gap_b1": dims.gaps["b1"]}


def _cmd_rep_count(args):
    pres = _resolve_presentation(args.presentation)
    classes = enumerate_components(pres, trials=args.trials, seed=args.seed)
    return {"presentation": str(pres),
            "classes": [{"traces": list(c.trace_key), "count": c.count,
                         "h1": c.h1, "stabilizer_dim": c.stabilizer_dim}
                        for c in classes]}


def _cmd_lines_cocycle_check(args):
    grid = _parse_grid(args.grid, 2)
    rng = np.random.default_rng(args.seed)
    a = random_algebra_form(grid, 1, rng, scale=0.4, kmax=1)
    xi1 = random_algebra_form(grid, 0, rng, scale=0.3, kmax=1)
    xi2 = random_algebra_form(grid, 0, rng, scale=0.3, kmax=1)
    g1 = GaugeMap(grid, su2.exp_alg(xi1.data[0]), check_smooth=False)
    lhs = c_sigma(gauge_act(a, g1), xi2, args.time_slices) \
        * c_sigma(a, xi1, args.time_slices)
    rhs = c_sigma_product(a, [xi1, xi2], args.time_slices)
    return {"value_re": lhs.real, "value_im": lhs.imag,
            "residuals": [abs(lhs - rhs)]}


def _cmd_lines_pt(args):
    conns = _path_connections(args.path, 2)
    val = parallel_transport(ConnectionPath(conns))
    return {"value_re": val.real, "value_im": val.imag, "residuals": []}


def _cmd_lines_cylinder_cs(args):
    conns = _path_connections(args.path, 2)
    path = ConnectionPath(conns)
    val = cylinder_cs(path)
    pt = parallel_transport(path)
    return {"value_re": val.real, "value_im": val.imag,
            "residuals": [abs(val - pt)]}


def _cmd_spec_kernel(args):
    conn = _resolve_connection(args.connection, args, 3)
    op = assemble_D(conn)
    if args.out_matrix:
        from .io import write_matrix_triplets
        write_matrix_triplets(args.out_matrix, op)
    mode = "dense" if op.dim <= args.dense_cap else "near-zero"
    result = eigen(op, mode, k=24)
    values = result.values
    near = values[np.abs(values) < 10 * args.tol]
    kdim = int(np.sum(np.abs(values) < args.tol))
    return {"dim": op.dim, "kernel_dim": kdim, "mode": mode,
            "eigenvalues_near_zero": [float(v) for v in np.sort(near)]}


def _cmd_spec_flow(args):
    conns = _path_connections(args.path, 3)
    rep = spectral_flow(conns, epsilon=args.epsilon, jobs=args.jobs)
    return {"sf": rep.sf, "epsilon": rep.epsilon, "samples": len(rep.snapshots),
            "warnings": rep.warnings}


def _cmd_spec_eta(args):
    conn = _resolve_connection(args.connection, args, 3)
    op = assemble_D(conn)
    return {"eta": discrete_eta(op, epsilon=args.epsilon)}


# ---------------------------------------------------------------------------
# parser

def _add_common(sub):
    sub.add_argument("--grid", help="sites per axis: one integer or comma list")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub.add_argument("--jobs", type=int,
                     default=int(os.environ.get("CSTK_JOBS", "0")) or None,
                     help="cap on internal parallelism")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--json", dest="format", action="store_const", const="json")
    sub.add_argument("--csv", dest="format", action="store_const", const="csv")
    sub.add_argument("--out", help="write output to a file instead of stdout")
    sub.add_argument("--config", help="key = value defaults file "
                     "(precedence: flags > config > defaults)")


def build_parser():
    parser = argparse.ArgumentParser(prog="cstk", description=__doc__)
    top = parser.add_subparsers(dest="command", required=True)

    cs_p = top.add_parser("cs", help="Chern-Simons action operations")
    cs_sub = cs_p.add_subparsers(dest="subcommand", required=True)
    p = cs_sub.add_parser("eval")
    p.add_argument("--connection", required=False)
    _add_common(p)
    p.set_defaults(handler=_cmd_cs_eval)
    p = cs_sub.add_parser("gauge-shift")
    p.add_argument("--connection")
    p.add_argument("--gauge")
    _add_common(p)
    p.set_defaults(handler=_cmd_cs_gauge_shift)
    p = cs_sub.add_parser("degree")
    p.add_argument("--gauge")
    _add_common(p)
    p.set_defaults(handler=_cmd_cs_degree)
    p = cs_sub.add_parser("chern-weil")
    p.add_argument("--connection")
    _add_common(p)
    p.set_defaults(handler=_cmd_cs_chern_weil)

    gauge_p = top.add_parser("gauge", help="gauge field operations")
    gauge_sub = gauge_p.add_subparsers(dest="subcommand", required=True)
    p = gauge_sub.add_parser("flatten")
    p.add_argument("--connection")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--out-field", help="write the flattened connection here")
    _add_common(p)
    p.set_defaults(handler=_cmd_gauge_flatten)

    hol_p = top.add_parser("hol", help="holonomy operations")
    hol_sub = hol_p.add_subparsers(dest="subcommand", required=True)
    p = hol_sub.add_parser("loop")
    p.add_argument("--connection")
    p.add_argument("--loop", required=True)
    p.add_argument("--steps", type=int, default=256)
    _add_common(p)
    p.set_defaults(handler=_cmd_hol_loop)
    p = hol_sub.add_parser("rep")
    p.add_argument("--connection")
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--flat-tol", type=float, default=1e-6)
    _add_common(p)
    p.set_defaults(handler=_cmd_hol_rep)

    rep_p = top.add_parser("rep", help="representation variety operations")
    rep_sub = rep_p.add_subparsers(dest="subcommand", required=True)
    p = rep_sub.add_parser("solve")
    p.add_argument("--presentation")
    p.add_argument("--trials", type=int, default=10)
    _add_common(p)
    p.set_defaults(handler=_cmd_rep_solve)
    p = rep_sub.add_parser("cohomology")
    p.add_argument("--presentation")
    p.add_argument("--rep", required=True, help="representation file")
    _add_common(p)
    p.set_defaults(handler=_cmd_rep_cohomology)
    p = rep_sub.add_parser("count")
    p.add_argument("--presentation")
    p.add_argument("--trials", type=int, default=500)
    _add_common(p)
    p.set_defaults(handler=_cmd_rep_count)

    lines_p = top.add_parser("lines", help="Chern-Simons line operations")
    lines_sub = lines_p.add_subparsers(dest="subcommand", required=True)
    p = lines_sub.add_parser("cocycle-check")
    p.add_argument("--time-slices", type=int, default=65)
    _add_common(p)
    p.set_defaults(handler=_cmd_lines_cocycle_check)
    p = lines_sub.add_parser("pt")
    p.add_argument("--path", required=True, help="directory of field files")
    _add_common(p)
    p.set_defaults(handler=_cmd_lines_pt)
    p = lines_sub.add_parser("cylinder-cs")
    p.add_argument("--path", required=True, help="directory of field files")
    _add_common(p)
    p.set_defaults(handler=_cmd_lines_cylinder_cs)

    spec_p = top.add_parser("spec", help="spectral operations")
    spec_sub = spec_p.add_subparsers(dest="subcommand", required=True)
    p = spec_sub.add_parser("kernel")
    p.add_argument("--connection")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dense-cap", type=int, default=4000)
    p.add_argument("--out-matrix", help="dump the operator as row/col/value triplets")
    _add_common(p)
    p.set_defaults(handler=_cmd_spec_kernel)
    p = spec_sub.add_parser("flow")
    p.add_argument("--path", required=True, help="directory of field files")
    p.add_argument("--epsilon", type=float, default=1e-6)
    _add_common(p)
    p.set_defaults(handler=_cmd_spec_flow)
    p = spec_sub.add_parser("eta")
    p.add_argument("--connection")
    p.add_argument("--epsilon", type=float, default=1e-8)
    _add_common(p)
    p.set_defaults(handler=_cmd_spec_eta)

    return parser


def _apply_config(args):
    """Fill unset options from a `key = value` config file."""
    if not getattr(args, "config", None):
        return args
    overrides = {}
    with open(args.config) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            overrides[key.strip().replace("-", "_")] = value.strip()
    for key, value in overrides.items():
        if not hasattr(args, key):
            continue
        current = getattr(args, key)
        if current is None:
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _apply_config(args)
    try:
        report = args.handler(args)
    except SystemExit2 as exc:
        return exc.code
    except NonConvergence as exc:
        payload = {"error": "non_convergence", "message": str(exc)}
        if exc.residual is not None:
            payload["residual"] = float(exc.residual)
        _write_output(args, payload)
        return 3
    except (CstkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_output(args, report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
