"""Command-line front end: generate problems, factor, solve, compare.

JSON reports are the machine contract; the text output is auxiliary.
Exit codes: 0 success/converged, 1 error, 2 solver did not converge.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import problems
from .errors import RscholError
from .factor import SolverConfig, factorize
from .ordering import read_coordinates, spectral_coordinates, write_coordinates
from .pcg import jacobi_preconditioner, pcg_solve
from .sparse import read_matrix_market, write_matrix_market

GEN_KINDS = ("laplacian2d", "laplacian3d", "aniso-poisson", "elasticity-like")


def _limit_threads(count):
    """Best-effort cap on BLAS/OpenMP pool sizes (default 1, deterministic)."""
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(count))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=count)
    except Exception:
        pass


def _add_solver_flags(p):
    p.add_argument("--tau-o", type=float, default=400, help="separator compression threshold")
    p.add_argument("--tau-d", type=int, default=256, help="dense diagonal leaf size")
    p.add_argument("--alpha-o", type=float, default=1.0, help="off-diagonal rank constant")
    p.add_argument("--alpha-d", type=float, default=0.5, help="initial diagonal rank constant")
    p.add_argument("--oversample", type=int, default=8, help="rank oversampling")
    p.add_argument("--power-iters", type=int, default=1, help="range-finder power iterations")
    p.add_argument("--seed", type=int, default=0, help="randomized compression seed")
    p.add_argument("--no-interior-blocks", action="store_true",
                   help="store subdomain coupling rows explicitly")
    p.add_argument("--coords", type=Path, default=None, help="vertex coordinate file")
    p.add_argument("--spectral", action="store_true",
                   help="derive coordinates from the graph Laplacian")
    p.add_argument("--threads", type=int, default=1, help="dense kernel threads")
    p.add_argument("--report", type=Path, default=None, help="write JSON report here")
    p.add_argument("--dump-symbolic", action="store_true",
                   help="print a JSON symbolic summary to stdout")


def _config_from(args):
    seed = args.seed
    env_seed = os.environ.get("RSC_SEED")
    if env_seed is not None:
        seed = int(env_seed)
    return SolverConfig(
        tau_o=args.tau_o,
        tau_d=args.tau_d,
        alpha_o=args.alpha_o,
        alpha_d=args.alpha_d,
        oversample=args.oversample,
        power_iters=args.power_iters,
        seed=seed,
        interior_blocks=not args.no_interior_blocks,
    )


def _load_problem(args):
    A = read_matrix_market(args.matrix)
    coords = None
    if args.coords is not None and args.spectral:
        raise RscholError("--coords and --spectral are mutually exclusive")
    if args.coords is not None:
        coords = read_coordinates(args.coords, n=A.n)
    elif args.spectral:
        coords = spectral_coordinates(A)
    return A, coords


def _symbolic_summary(F):
    part = F.partition
    sizes = [part.ncols(j) for j in range(part.count)]
    fill = 0
    for j in range(part.count):
        nc = part.ncols(j)
        fill += nc * (nc + 1) // 2 + nc * len(part.rows[j])
    return {
        "supernodes": part.count,
        "separator_supernodes": int(part.is_separator.sum()),
        "column_counts": sizes,
        "fill_estimate": fill,
    }


def _write_report(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n", encoding="ascii")


def cmd_gen(args):
    kind = args.kind
    if kind == "laplacian2d":
        A, coords = problems.laplacian_2d(args.n)
    elif kind == "laplacian3d":
        A, coords = problems.laplacian_3d(args.n)
    elif kind == "aniso-poisson":
        k = [float(t) for t in args.k.split(",")] if args.k else [1.0, 1.0, 1.0]
        if len(k) == 3:
            k = k + [0.0, 0.0, 0.0]
        if len(k) != 6:
            raise RscholError("--k needs 3 or 6 comma-separated values")
        K = [[k[0], k[3], k[4]], [k[3], k[1], k[5]], [k[4], k[5], k[2]]]
        A, coords = problems.aniso_poisson_3d(args.n, K=K, contrast=args.contrast)
    elif kind == "elasticity-like":
        A, coords = problems.elasticity_3d(args.n, young=args.young, poisson=args.poisson)
    else:
        raise RscholError(f"unknown kind {kind!r}")
    write_matrix_market(A, args.out)
    coords_out = args.coords_out or args.out.with_suffix(".coords")
    write_coordinates(coords, coords_out)
    print(f"wrote {args.out} (n={A.n}, nnz={A.nnz_lower}) and {coords_out}")
    return 0


def cmd_factor(args):
    A, coords = _load_problem(args)
    config = _config_from(args)
    F = factorize(A, config, coords=coords)
    if args.dump_symbolic:
        print(json.dumps(_symbolic_summary(F), sort_keys=True))
    payload = {
        "matrix": str(args.matrix),
        "n": A.n,
        "nnz": A.nnz_lower,
        "config": config.to_dict(),
        "factor": F.stats.to_dict(),
    }
    _write_report(args.report, payload)
    return 0


def cmd_solve(args):
    import numpy as np

    A, coords = _load_problem(args)
    config = _config_from(args)
    F = factorize(A, config, coords=coords)
    if args.dump_symbolic:
        print(json.dumps(_symbolic_summary(F), sort_keys=True))
    b = np.ones(A.n)
    x, report = pcg_solve(
        A, b, preconditioner=F, tol=args.tol, max_iter=args.max_iters,
        setup_time=F.stats.phase_times.get("total", 0.0),
    )
    payload = {
        "matrix": str(args.matrix),
        "n": A.n,
        "nnz": A.nnz_lower,
        "config": config.to_dict(),
        "factor": F.stats.to_dict(),
        "solve": report.to_dict(),
    }
    _write_report(args.report, payload)
    if args.residuals is not None:
        lines = [f"{k},{v:.17g}" for k, v in enumerate(report.relative_residual_history)]
        args.residuals.write_text("iteration,relative_residual\n" + "\n".join(lines) + "\n")
    return 0 if report.converged else 2


def cmd_compare(args):
    import numpy as np

    A, coords = _load_problem(args)
    config = _config_from(args)
    F = factorize(A, config, coords=coords)
    b = np.ones(A.n)
    runs = {}
    x, rep = pcg_solve(A, b, preconditioner=None, tol=args.tol, max_iter=args.max_iters)
    runs["none"] = (rep, 0)
    x, rep = pcg_solve(A, b, preconditioner=jacobi_preconditioner(A), tol=args.tol,
                       max_iter=args.max_iters)
    runs["jacobi"] = (rep, A.n)
    x, rep = pcg_solve(A, b, preconditioner=F, tol=args.tol, max_iter=args.max_iters,
                       setup_time=F.stats.phase_times.get("total", 0.0))
    runs["rsc"] = (rep, F.stats.stored_scalars)

    rows = {}
    print(f"{'method':<8} {'iters':>7} {'converged':>10} {'setup(s)':>10} "
          f"{'solve(s)':>10} {'scalars':>12}")
    for name, (rep, scalars) in runs.items():
        setup = rep.wall_times.get("setup", 0.0)
        solve = rep.wall_times.get("solve", 0.0)
        print(f"{name:<8} {rep.iterations:>7} {str(rep.converged):>10} "
              f"{setup:>10.3f} {solve:>10.3f} {scalars:>12}")
        rows[name] = {
            "iterations": rep.iterations,
            "converged": rep.converged,
            "relative_residual": rep.relative_residual,
            "setup_time": setup,
            "solve_time": solve,
            "stored_scalars": scalars,
        }
    payload = {
        "matrix": str(args.matrix),
        "n": A.n,
        "nnz": A.nnz_lower,
        "config": config.to_dict(),
        "methods": rows,
    }
    if args.report is not None:
        _write_report(args.report, payload)
    ok = all(rep.converged for rep, _ in runs.values())
    return 0 if ok else 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rschol",
        description="Rank-structured sparse Cholesky preconditioner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an SPD test problem")
    g.add_argument("--kind", choices=GEN_KINDS, required=True)
    g.add_argument("--n", type=int, required=True, help="grid size per dimension")
    g.add_argument("--out", type=Path, required=True, help="Matrix Market output path")
    g.add_argument("--coords-out", type=Path, default=None)
    g.add_argument("--k", type=str, default=None,
                   help="diffusion tensor: kxx,kyy,kzz[,kxy,kxz,kyz]")
    g.add_argument("--contrast", type=float, default=1.0)
    g.add_argument("--young", type=float, default=1.0)
    g.add_argument("--poisson", type=float, default=0.3)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("factor", help="factor a matrix, report statistics")
    f.add_argument("--matrix", type=Path, required=True)
    _add_solver_flags(f)
    f.set_defaults(func=cmd_factor)

    s = sub.add_parser("solve", help="factor and run preconditioned CG")
    s.add_argument("--matrix", type=Path, required=True)
    _add_solver_flags(s)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--max-iters", type=int, default=None)
    s.add_argument("--residuals", type=Path, default=None,
                   help="write residual history CSV here")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("compare", help="compare none/Jacobi/RSC preconditioning")
    c.add_argument("--matrix", type=Path, required=True)
    _add_solver_flags(c)
    c.add_argument("--tol", type=float, default=1e-5)
    c.add_argument("--max-iters", type=int, default=None)
    c.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        _limit_threads(args.threads)
    try:
        return args.func(args)
    except RscholError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
