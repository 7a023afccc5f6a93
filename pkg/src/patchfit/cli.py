"""Command-line interface.

Subcommands: ``select`` (occupancy grid to point cloud), ``fit`` (point cloud
to surface document), ``project`` (points onto a fitted surface), ``study``
(simulation studies from a config file).

Exit codes: 0 success, 2 usage or parse error, 3 numerical failure,
4 empty selection.
"""

from __future__ import annotations

import argparse
import sys
from time import perf_counter

import numpy as np

from . import io
from .bezier import design_matrix, g_value
from .errors import (
    DegenerateGeometryError,
    EmptySelectionError,
    FileFormatError,
    PatchFitError,
    ProjectionError,
    RankDeficiencyError,
)
from .pipeline import FitSettings, fit_surface, outer_iterations
from .projection import ProjectionSettings, project_point
from .simulate import run_study
from .voxel import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITERS,
    DEFAULT_NEIGHBORHOOD,
    extract_cloud,
    select_points,
)

_FIT_DEFAULTS = FitSettings()
_PROJ_DEFAULTS = ProjectionSettings()

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_EMPTY = 4


def _add_projection_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-newton-iters", type=int, default=_PROJ_DEFAULTS.max_newton_iters,
                        help="Newton iteration cap per point (default %(default)s)")
    parser.add_argument("--grad-tol", type=float, default=_PROJ_DEFAULTS.grad_tol,
                        help="stationarity threshold on the gradient norm (default %(default)s)")
    parser.add_argument("--armijo-c", type=float, default=_PROJ_DEFAULTS.armijo_c,
                        help="sufficient-decrease constant (default %(default)s)")
    parser.add_argument("--backtrack-factor", type=float, default=_PROJ_DEFAULTS.backtrack_factor,
                        help="step shrink factor per backtrack (default %(default)s)")
    parser.add_argument("--max-backtracks", type=int, default=_PROJ_DEFAULTS.max_backtracks,
                        help="backtracking cap per Newton step (default %(default)s)")


def _projection_settings(args) -> ProjectionSettings:
    return ProjectionSettings(
        max_newton_iters=args.max_newton_iters,
        grad_tol=args.grad_tol,
        armijo_c=args.armijo_c,
        backtrack_factor=args.backtrack_factor,
        max_backtracks=args.max_backtracks,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchfit",
        description="Local Bezier surface patches from voxel occupancy grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_select = sub.add_parser("select", help="extract a weighted point cloud from a VOX1 grid")
    p_select.add_argument("grid", help="VOX1 occupancy grid file")
    p_select.add_argument("-o", "--output", required=True, help="output point-cloud file")
    seed_group = p_select.add_mutually_exclusive_group(required=True)
    seed_group.add_argument("--seed-voxel", nargs=3, type=int, metavar=("I", "J", "K"),
                            help="query voxel index")
    seed_group.add_argument("--query", nargs=3, type=float, metavar=("X", "Y", "Z"),
                            help="physical query point (mm), snapped to the nearest voxel")
    p_select.add_argument("--epsilon", type=int, default=DEFAULT_EPSILON,
                          help="minimum exterior neighbors for a boundary voxel (default %(default)s)")
    p_select.add_argument("--l", type=int, default=DEFAULT_NEIGHBORHOOD, dest="l",
                          help="odd growth neighborhood size (default %(default)s)")
    p_select.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS,
                          help="region growth steps (default %(default)s)")
    p_select.add_argument("--weight-mode", choices=("uniform", "inverse-distance", "external-map"),
                          default="uniform", help="point weight mode (default %(default)s)")
    p_select.add_argument("--weight-grid", default=None,
                          help="VOX1-layout real grid for external-map weights")

    p_fit = sub.add_parser("fit", help="fit a surface to a point-cloud file")
    p_fit.add_argument("cloud", help="point-cloud file (x,y,z,w)")
    p_fit.add_argument("-o", "--output", required=True, help="output surface document")
    p_fit.add_argument("--lam", type=float, default=_FIT_DEFAULTS.lam,
                       help="ridge regularization strength (default %(default)s)")
    p_fit.add_argument("--max-outer-iters", type=int, default=_FIT_DEFAULTS.max_outer_iters,
                       help="alternating iteration cap (default %(default)s)")
    p_fit.add_argument("--rel-sigma2-tol", type=float, default=_FIT_DEFAULTS.rel_sigma2_tol,
                       help="relative variance-change stopping tolerance (default %(default)s)")
    p_fit.add_argument("--order-cap-u", type=int, default=_FIT_DEFAULTS.order_cap[0],
                       help="maximum order in u (default %(default)s)")
    p_fit.add_argument("--order-cap-v", type=int, default=_FIT_DEFAULTS.order_cap[1],
                       help="maximum order in v (default %(default)s)")
    p_fit.add_argument("--fixed-orders", nargs=2, type=int, metavar=("N_U", "N_V"), default=None,
                       help="freeze the surface order instead of selecting it")
    _add_projection_flags(p_fit)

    p_project = sub.add_parser("project", help="project points onto a fitted surface")
    p_project.add_argument("surface", help="surface document from 'fit'")
    p_project.add_argument("cloud", help="point-cloud file to project")
    p_project.add_argument("-o", "--output", required=True, help="output table (u,v,distance,converged)")
    p_project.add_argument("--init-grid", type=int, default=5,
                           help="fallback initialization grid size (default %(default)s)")
    _add_projection_flags(p_project)

    p_study = sub.add_parser("study", help="run a simulation study from a config")
    p_study.add_argument("config", help="config path, or bundled name (table1_trends, fig4_plane)")
    p_study.add_argument("-o", "--output", default="study",
                         help="output prefix for _table.csv and _long.csv (default %(default)s)")
    p_study.add_argument("--seed", type=int, default=None,
                         help="override the base seed of every spec")
    p_study.add_argument("--trials", type=int, default=None,
                         help="override the trial count of every spec")
    return parser


def cmd_select(args) -> int:
    grid = io.read_voxel_grid(args.grid)
    if args.seed_voxel is not None:
        seed = tuple(args.seed_voxel)
    else:
        query = np.asarray(args.query, dtype=np.float64)
        seed = tuple(int(round(c)) for c in (query - grid.origin) / grid.spacing)
    region = select_points(grid, seed, l=args.l, max_iters=args.max_iters, epsilon=args.epsilon)
    weight_grid = io.read_voxel_grid(args.weight_grid) if args.weight_grid else None
    cloud = extract_cloud(region, args.weight_mode, weight_grid)
    io.write_point_cloud(cloud, args.output)
    print(f"selected {cloud.n_x} points in {args.max_iters} growth iterations -> {args.output}")
    return 0


def cmd_fit(args) -> int:
    cloud = io.read_point_cloud(args.cloud)
    if cloud.n_x < 3:
        print("error: need at least 3 points to fit", file=sys.stderr)
        return EXIT_USAGE
    settings = FitSettings(
        max_outer_iters=args.max_outer_iters,
        rel_sigma2_tol=args.rel_sigma2_tol,
        lam=args.lam,
        order_cap=(args.order_cap_u, args.order_cap_v),
        projection=_projection_settings(args),
        fixed_orders=tuple(args.fixed_orders) if args.fixed_orders else None,
    )
    tic = perf_counter()
    model, trace = fit_surface(cloud, settings)
    elapsed = perf_counter() - tic
    io.write_surface_model(model, cloud, args.output)
    print(
        f"orders ({model.n_u}, {model.n_v})  sigma2 {model.sigma2:.6e}  t {model.t:.6f}  "
        f"iterations {outer_iterations(trace)}  wall {elapsed * 1e3:.1f} ms -> {args.output}"
    )
    return 0


def cmd_project(args) -> int:
    model, _ = io.read_surface_model(args.surface)
    cloud = io.read_point_cloud(args.cloud)
    if cloud.n_x == 0:
        print("error: cannot project an empty cloud", file=sys.stderr)
        return EXIT_USAGE
    settings = _projection_settings(args)
    has_records = model.u.size > 0
    if not has_records:
        grid = np.linspace(0.0, 1.0, max(args.init_grid, 2))
        inits = np.array([(u, v) for u in grid for v in grid])

    lines = ["u,v,distance,converged"]
    successes = 0
    for point in cloud.points:
        if has_records:
            d2 = np.sum((point - _record_points(model)) ** 2, axis=1)
            j = int(np.argmin(d2))
            u0, v0 = model.u[j], model.v[j]
        else:
            values = [g_value(point, u0c, v0c, model.surface) for u0c, v0c in inits]
            u0, v0 = inits[int(np.argmin(values))]
        try:
            res = project_point(point, model.surface, u0, v0, settings)
        except ProjectionError:
            lines.append("nan,nan,nan,0")
            continue
        successes += 1
        distance = float(np.sqrt(2.0 * res.g))
        lines.append(f"{res.u!r},{res.v!r},{distance!r},{int(res.converged)}")
    with open(args.output, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"projected {successes}/{cloud.n_x} points -> {args.output}")
    return 0 if successes else EXIT_NUMERICAL


def _record_points(model):
    b = design_matrix(model.u, model.v, model.n_u, model.n_v)
    return b.T @ model.surface.flat


def cmd_study(args) -> int:
    specs = io.load_study_config(args.config)
    if args.seed is not None:
        for spec in specs:
            spec.seed = args.seed
    if args.trials is not None:
        for spec in specs:
            spec.trials = args.trials
    rows, records = run_study(specs)
    io.write_study_table(rows, f"{args.output}_table.csv")
    io.write_study_long(records, f"{args.output}_long.csv")
    header = (f"{'name':<28} {'mode':<6} {'n_tr':>5} {'sigma2_y':>9} {'iter.':>6} "
              f"{'size':>6} {'s2_tr':>10} {'s2_te':>10} {'ms':>8} {'fail':>4}")
    print(header)
    for row in rows:
        print(f"{row.name:<28.28} {row.mode:<6} {row.n_tr:>5} {row.sigma2_y:>9.3g} "
              f"{row.mean_iterations:>6.2f} {row.mean_size:>6.2f} {row.mean_sigma2_tr:>10.3e} "
              f"{row.mean_sigma2_te:>10.3e} {row.mean_ms:>8.1f} {row.failures:>4}")
    print(f"wrote {args.output}_table.csv and {args.output}_long.csv")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"select": cmd_select, "fit": cmd_fit, "project": cmd_project, "study": cmd_study}
    try:
        return handlers[args.command](args)
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptySelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (DegenerateGeometryError, RankDeficiencyError, ProjectionError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, PatchFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
