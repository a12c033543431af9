"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 nonsmooth-region stop, 3 non-convergence
or partial result, 4 I/O error.  ``SQRTLASSO_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .applications import estimate_precision, estimate_sigma, lambda_for_sparsity, solve_cmr
from .core import DenseMatrix, Problem
from .datagen import GenSpec, generate, generate_chain_graph, generate_multitask
from .errors import NonsmoothRegion, NonsmoothStop, UsageError
from .gd import GdConfig, SolveResult, Status, solve_gd
from .loss import LossKind, evaluate
from .newton import NewtonConfig, solve_newton
from .pathwise import PathConfig, default_lambda, solve_path
from .prox import kkt_residual

log = logging.getLogger("sqrtlasso")

EXIT_OK, EXIT_USAGE, EXIT_NONSMOOTH, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3, 4
RESULT_SCHEMA = "sqrtlasso.result/1"
PATH_SCHEMA = "sqrtlasso.path/1"
MANIFEST_NAME = "manifest.json"
TRACE_COLUMNS = ("iter", "objective", "omega", "residual_norm", "nnz")
BENCH_COLUMNS = ("sigma", "N", "eps", "iterations", "seconds", "minimal_mse")


class CliIOError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    artifacts: list[str] = field(default_factory=list)
    version: str = f"sqrtlasso {__version__}"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


# -- file helpers ------------------------------------------------------------


def write_csv(path: Path, arr) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    np.savetxt(path, arr, fmt="%.17g", delimiter=",")


def read_csv(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise CliIOError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise CliIOError(f"malformed CSV {path}: {exc}") from exc


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def write_trace(path: Path, trace) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for rec in trace:
            fh.write(f"{rec.iter},{rec.objective:.17g},{rec.omega:.17g},{rec.residual_norm:.17g},{rec.nnz}\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliIOError(f"cannot create {out}: {exc}") from exc
    return out


def _finish(args, out: Path, artifacts, seed=None) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(args.command, config, seed, sorted(artifacts))
    (out / MANIFEST_NAME).write_text(manifest.to_json() + "\n")


def _load_xy(args):
    data = Path(args.data) if args.data else None
    xpath = Path(args.x) if args.x else (data / "X.csv" if data else None)
    ypath = Path(args.y) if args.y else (data / "y.csv" if data else None)
    if xpath is None or ypath is None:
        raise UsageError("give --data DIR or both --x and --y")
    x = read_csv(xpath)
    y = read_csv(ypath)
    if y.shape[1] == 1:
        y = y[:, 0]
    return x, y


def _seed(args) -> int:
    env = os.environ.get("SQRTLASSO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SQRTLASSO_SEED must be an integer, got {env!r}")
    return args.seed


def _sparse_theta(theta) -> dict:
    return {str(j): float(theta[j]) for j in np.flatnonzero(theta)}


def _status_code(status: Status) -> int:
    if status is Status.CONVERGED:
        return EXIT_OK
    if status is Status.NONSMOOTH_STOP:
        return EXIT_NONSMOOTH
    return EXIT_NONCONVERGED


def _path_config(args, trace=False) -> PathConfig:
    return PathConfig(n_stages=args.n_stages, lambda_target=args.lambda_target, eps_final=args.eps,
                      algo=args.algo, eps_rule=args.eps_rule, trace=trace)


# -- commands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    seed = _seed(args)
    out = _out_dir(args)
    artifacts = []
    if args.chain_rho is not None:
        x = generate_chain_graph(args.n, args.d, args.chain_rho, seed)
        write_csv(out / "X.csv", x.array)
        meta = {"kind": "chain", "n": args.n, "d": args.d, "rho": args.chain_rho, "seed": seed}
        artifacts = ["X.csv", "meta.json"]
    else:
        spec = GenSpec(n=args.n, d=args.d, s_star=args.s, sigma=args.sigma, rho=args.rho, seed=seed)
        meta = {"kind": "linear", **{k: v for k, v in asdict(spec).items() if k != "theta_values"}}
        if args.task_sigmas:
            sigmas = [float(s) for s in args.task_sigmas.split(",")]
            x, y, theta = generate_multitask(spec, sigmas)
            meta.update(kind="multitask", task_sigmas=sigmas)
            write_csv(out / "Y.csv", y)
            artifacts = ["X.csv", "Y.csv", "theta_star.csv", "meta.json"]
        else:
            x, y, theta = generate(spec)
            write_csv(out / "y.csv", y)
            artifacts = ["X.csv", "y.csv", "theta_star.csv", "meta.json"]
        write_csv(out / "X.csv", x.array)
        write_csv(out / "theta_star.csv", theta)
    write_json(out / "meta.json", meta)
    _finish(args, out, artifacts, seed)
    return EXIT_OK


def _newton_via_path(problem, lam, args) -> SolveResult:
    """Cold-start Newton solve reached through the warm-started path.

    From theta = 0 with n < d the second-order model is flat along
    interpolating directions and the subproblem can be unbounded; the path
    keeps every Newton stage next to a sparse solution.  Iteration counts
    and the trace cover all stages.
    """
    path = solve_path(problem, LossKind.SQRT_L2,
                      PathConfig(lambda_target=lam, eps_final=args.eps, algo="newton",
                                 trace=bool(args.trace), solver_options={"max_outer": args.max_iter}))
    trace = None
    if args.trace:
        trace, offset = [], 0
        for st in path.stage_results:
            for rec in st.trace[(1 if trace else 0):]:
                trace.append(replace(rec, iter=rec.iter + offset))
            offset += st.iterations
    theta = path.theta_hat
    try:
        state = evaluate(problem, LossKind.SQRT_L2, theta)
    except NonsmoothRegion:
        omega = obj = rn = math.nan
    else:
        omega = kkt_residual(problem, LossKind.SQRT_L2, lam, theta, state)
        obj = state.loss_value + lam * float(np.abs(theta).sum())
        rn = state.residual_norm
    sweeps = sum(st.inner_sweeps for st in path.stage_results)
    return SolveResult(theta, omega, obj, path.total_inner_iterations, path.status, rn,
                       trace=trace, inner_sweeps=sweeps)


def cmd_solve(args) -> int:
    x, y = _load_xy(args)
    problem = Problem(x, y)
    lam = args.lam if args.lam is not None else default_lambda(problem.n, problem.d)
    theta0 = None
    if args.theta0:
        theta0 = read_csv(Path(args.theta0))[:, 0]
    if args.algo == "newton" and theta0 is None:
        res = _newton_via_path(problem, lam, args)
    elif args.algo == "newton":
        res = solve_newton(problem, NewtonConfig(lam=lam, eps=args.eps, max_outer=args.max_iter,
                                                 trace=bool(args.trace)), theta0)
    else:
        res = solve_gd(problem, LossKind.SQRT_L2, GdConfig(lam=lam, eps=args.eps, max_iter=args.max_iter,
                                                           trace=bool(args.trace)), theta0)
    out = _out_dir(args)
    doc = {
        "schema_version": RESULT_SCHEMA,
        "theta": _sparse_theta(res.theta_hat),
        "omega": res.omega,
        "objective": res.objective,
        "iterations": res.iterations,
        "status": res.status.value,
        "sigma_hat": estimate_sigma(problem, res.theta_hat),
        "lambda": lam,
        "algo": args.algo,
    }
    write_json(out / "result.json", doc)
    artifacts = ["result.json"]
    if args.trace:
        write_trace(out / args.trace, res.trace)
        artifacts.append(args.trace)
    _finish(args, out, artifacts)
    return _status_code(res.status)


def cmd_path(args) -> int:
    x, y = _load_xy(args)
    problem = Problem(x, y)
    res = solve_path(problem, LossKind.SQRT_L2, _path_config(args, trace=args.trace))
    out = _out_dir(args)
    stages = []
    for k, st in enumerate(res.stage_results, start=1):
        stages.append({
            "stage": k,
            "lambda": float(res.lambdas[k]) if k < len(res.lambdas) else float(res.lambdas[-1]),
            "omega": st.omega,
            "objective": st.objective,
            "iterations": st.iterations,
            "mse": st.residual_norm ** 2 / problem.n,
            "sigma_hat": st.residual_norm / problem.sqrt_n,
            "status": st.status.value,
        })
    doc = {
        "schema_version": PATH_SCHEMA,
        "lambdas": [float(v) for v in res.lambdas],
        "eta_lambda": res.eta_lambda,
        "stages": stages,
        "minimal_mse": res.minimal_mse,
        "total_inner_iterations": res.total_inner_iterations,
        "status": res.status.value,
        "failed_stage": res.failed_stage,
        "theta": _sparse_theta(res.theta_hat),
    }
    write_json(out / "path.json", doc)
    artifacts = ["path.json"]
    if args.trace:
        for k, st in enumerate(res.stage_results, start=1):
            name = f"trace_stage_{k:03d}.csv"
            write_trace(out / name, st.trace)
            artifacts.append(name)
    _finish(args, out, artifacts)
    if res.failed_stage is not None:
        log.error("path stopped at stage %d: %s", res.failed_stage, res.status.value)
    return _status_code(res.status)


def cmd_bench(args) -> int:
    seed = _seed(args)
    out = _out_dir(args)
    n = max(2, round(200 * args.scale))
    d = max(4, round(2000 * args.scale))
    sigmas = [float(s) for s in args.sigmas.split(",")]
    stages = [int(s) for s in args.stages.split(",")]
    epss = [float(s) for s in args.eps_grid.split(",")]
    rows = []
    for sigma in sigmas:
        problems = []
        for r in range(args.seeds):
            x, y, _ = generate(GenSpec(n=n, d=d, sigma=sigma, seed=seed + r))
            problems.append(Problem(x, y))
        for n_stages in stages:
            for eps in epss:
                iters, secs, mses = [], [], []
                for problem in problems:
                    t0 = time.perf_counter()
                    res = solve_path(problem, LossKind.SQRT_L2, PathConfig(n_stages=n_stages, eps_final=eps))
                    secs.append(time.perf_counter() - t0)
                    iters.append(res.total_inner_iterations)
                    mses.append(res.minimal_mse)
                rows.append((sigma, n_stages, eps, float(np.mean(iters)), float(np.mean(secs)),
                             float(np.mean(mses))))
    with open(out / "bench.csv", "w") as fh:
        fh.write(",".join(BENCH_COLUMNS) + "\n")
        for sigma, n_stages, eps, it, sec, mse in rows:
            fh.write(f"{sigma:.17g},{n_stages},{eps:.17g},{it:.17g},{sec:.6f},{mse:.17g}\n")
    _finish(args, out, ["bench.csv"], seed)
    return EXIT_OK


def cmd_graph(args) -> int:
    data = read_csv(Path(args.data) / "X.csv" if args.data else Path(args.x))
    cfg = _path_config(args)
    jobs = args.jobs or os.cpu_count() or 1
    if args.target_sparsity is not None:
        lam, est = lambda_for_sparsity(data, args.target_sparsity, cfg, n_jobs=jobs)
    else:
        lam = args.lam if args.lam is not None else default_lambda(*data.shape)
        est = estimate_precision(data, lam, cfg, n_jobs=jobs)
    out = _out_dir(args)
    write_csv(out / "omega.csv", est.omega)
    with open(out / "edges.csv", "w") as fh:
        for i, j in est.edge_list():
            fh.write(f"{i},{j}\n")
    write_json(out / "graph.json", {"lambda": lam, "n_edges": est.n_edges, "sparsity": est.sparsity(),
                                    "failed_columns": est.failed_columns})
    _finish(args, out, ["omega.csv", "edges.csv", "graph.json"])
    d = data.shape[1]
    return EXIT_OK if len(est.failed_columns) <= 0.1 * d else EXIT_NONCONVERGED


def cmd_cmr(args) -> int:
    data = Path(args.data) if args.data else None
    x = read_csv(Path(args.x) if args.x else data / "X.csv")
    y = read_csv(Path(args.y) if args.y else data / "Y.csv")
    try:
        res = solve_cmr(x, y, args.lam, _path_config(args))
    except NonsmoothStop as exc:
        log.error("%s", exc)
        return EXIT_NONSMOOTH
    out = _out_dir(args)
    write_csv(out / "theta_mat.csv", res.theta_mat)
    with open(out / "row_support.csv", "w") as fh:
        for j in res.row_support:
            fh.write(f"{j}\n")
    _finish(args, out, ["theta_mat.csv", "row_support.csv"])
    unconverged = any(r.status is not Status.CONVERGED for r in res.stage_results)
    return EXIT_NONCONVERGED if unconverged else EXIT_OK


# -- parser --------------------------------------------------------------------


def _positive(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _add_data(p, y=True):
    p.add_argument("--data", help="directory holding the input CSV files")
    p.add_argument("--x", help="design matrix CSV (overrides --data)")
    if y:
        p.add_argument("--y", help="response CSV (overrides --data)")


def _add_path(p):
    p.add_argument("--n-stages", type=int, default=None)
    p.add_argument("--lambda-target", type=_positive, default=None,
                   help="final lambda (default sqrt(log d / n))")
    p.add_argument("--algo", choices=["gd", "newton"], default="gd")
    p.add_argument("--eps", type=_positive, default=1e-6, help="final-stage KKT tolerance")
    p.add_argument("--eps-rule", choices=["quarter-lambda", "final-eps"], default="quarter-lambda")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sqrtlasso", description="Square-root Lasso solvers")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate synthetic data")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=2000)
    p.add_argument("--s", type=int, default=3)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--task-sigmas", help="comma-separated noise levels; writes Y.csv")
    p.add_argument("--chain-rho", type=float, help="sample a chain graph instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve at one lambda")
    _add_data(p)
    p.add_argument("--lambda", dest="lam", type=_positive, default=None)
    p.add_argument("--algo", choices=["gd", "newton"], default="gd")
    p.add_argument("--eps", type=_positive, default=1e-6)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--theta0", help="CSV with the starting point")
    p.add_argument("--trace", nargs="?", const="trace.csv", default=None,
                   help="write per-iteration trace (default name trace.csv)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("path", help="pathwise solve")
    _add_data(p)
    _add_path(p)
    p.add_argument("--trace", action="store_true", help="write per-stage traces")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("bench", help="sigma x N x eps sweep")
    p.add_argument("--scale", type=_positive, default=1.0)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigmas", default="0.1,0.5,1,2")
    p.add_argument("--stages", default="1,10,30")
    p.add_argument("--eps-grid", default="1e-4,1e-5,1e-6")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("graph", help="sparse precision matrix")
    _add_data(p, y=False)
    _add_path(p)
    p.add_argument("--lambda", dest="lam", type=_positive, default=None)
    p.add_argument("--target-sparsity", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("cmr", help="calibrated multivariate regression")
    _add_data(p)
    _add_path(p)
    p.add_argument("--lambda", dest="lam", type=_positive, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cmr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sqrtlasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CliIOError, OSError) as exc:
        print(f"sqrtlasso: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
