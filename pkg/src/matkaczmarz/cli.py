"""Command-line front end.

Subcommands::

    generate  write a seeded instance as a directory of CSV matrices
    solve     run one method on an instance, write history CSV and summary JSON
    bench     seeded benchmark battery, one row per (method, theta)
    bounds    spectral constants, momentum ranges and rate factors
    fit       fit a test surface, write data, mesh, history and summary

Exit codes: 0 converged (or nothing to converge), 2 iteration cap reached,
1 usage or validation error, 3 internal invariant breach.
"""

import argparse
import csv
import json
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DivergenceError, InstanceError, InvariantError
from .problems import FAMILIES, RngSpec, generate, load_instance, save_instance
from .solver import Method, Sampling, SolverConfig, solve
from .surface import (
    eval_surface,
    fit_summary,
    fit_surface,
    sample_surface,
    write_grid_csv,
    write_obj,
    write_summary,
)
from .theory import rate_factors, spectral_bounds

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MAX_ITERS = 2
EXIT_INVARIANT = 3

METHOD_ALIASES = {"me": "me-rgrk", "pm": "pm-rgrk", "nm": "nm-rgrk"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for max-iters.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunSummary:
    method: str
    theta: float
    alpha: float
    beta: float
    it_mean: float
    it_median: float
    cpu_mean_seconds: float
    rrn_final_mean: float
    repeats: int
    seeds: list = field(default_factory=list)
    converged_runs: int = 0
    speedup_vs_baseline: float | None = None

    @property
    def it(self):
        """Mean iteration count rounded to an integer."""
        return int(round(self.it_mean))


def _method(name):
    name = METHOD_ALIASES.get(name, name)
    try:
        return Method(name)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown method {name!r}") from None


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _methods(text):
    return [_method(x.strip()) for x in text.split(",") if x.strip()]


def _add_instance_args(p):
    p.add_argument("--instance", help="instance directory written by 'generate'")
    p.add_argument("--family", choices=sorted(FAMILIES), help="generate the instance inline")
    p.add_argument("--dims", nargs=3, type=int, metavar=("M", "N", "P"))
    p.add_argument("--r1", type=int)
    p.add_argument("--r2", type=int)


def _add_solver_args(p, tol=1e-5):
    p.add_argument("--method", type=_method, default=Method.ME_RGRK)
    p.add_argument("--theta", type=float, default=0.9)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--refresh-period", type=int, default=5000)
    p.add_argument("--sampling", choices=[s.value for s in Sampling], default="proportional")


def build_parser():
    parser = _Parser(prog="matkaczmarz", description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, default=0, help="instance seed / solver seed base")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a seeded instance")
    g.add_argument("family", choices=sorted(FAMILIES))
    g.add_argument("m", type=int)
    g.add_argument("n", type=int)
    g.add_argument("p", type=int)
    g.add_argument("--r1", type=int)
    g.add_argument("--r2", type=int)

    s = sub.add_parser("solve", help="solve one instance")
    _add_instance_args(s)
    _add_solver_args(s)

    b = sub.add_parser("bench", help="seeded benchmark battery")
    b.add_argument("--family", choices=sorted(FAMILIES), default="dense")
    b.add_argument("--dims", nargs=3, type=int, metavar=("M", "N", "P"), default=[200, 25, 50])
    b.add_argument("--r1", type=int)
    b.add_argument("--r2", type=int)
    b.add_argument("--methods", type=_methods, default=_methods("me,pm,nm"))
    b.add_argument("--thetas", type=_floats, default=[0.9])
    b.add_argument("--repeats", type=int, default=20)
    b.add_argument("--tol", type=float, default=1e-5)
    b.add_argument("--max-iters", type=int, default=100_000)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--fixed-instance", action="store_true",
                   help="use one instance (seed base) for every replicate")

    d = sub.add_parser("bounds", help="theory constants for an instance")
    _add_instance_args(d)
    d.add_argument("--alphas", type=_floats, default=[0.5, 0.8, 0.9, 1.0, 1.5])
    d.add_argument("--betas", type=_floats, default=[1e-4, 1e-3, 0.01, 0.1, 0.3, 0.5])

    f = sub.add_parser("fit", help="fit a test surface")
    f.add_argument("--surface", type=int, default=1)
    f.add_argument("--m", type=int, default=100)
    f.add_argument("--p", type=int, default=40)
    f.add_argument("--n", type=int, default=30)
    f.add_argument("--params", choices=("grid", "chord"), default="grid")
    f.add_argument("--knots", choices=("averaging", "uniform"), default="averaging")
    f.add_argument("--rrn-norm", choices=("unsquared", "squared"), default="unsquared")
    _add_solver_args(f, tol=5e-4)
    return parser


def _instance(args):
    if args.instance:
        return load_instance(args.instance)
    if args.family and args.dims:
        m, n, p = args.dims
        return generate(args.family, m, n, p, RngSpec(args.seed, 0), args.r1, args.r2)
    raise UsageError("give --instance DIR or --family F --dims M N P")


def _config(args, seed):
    return SolverConfig(
        method=args.method,
        theta=args.theta,
        alpha=args.alpha,
        beta=args.beta,
        tol_rrn=args.tol,
        max_iters=args.max_iters,
        rng=RngSpec(seed, 1),
        refresh_period=args.refresh_period,
        sampling=args.sampling,
    )


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "rrn", "elapsed_seconds"])
        for k, rrn, t in history:
            w.writerow([k, f"{rrn:.17g}", f"{t:.17g}"])


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float):
        return x
    raise TypeError(f"not serialisable: {type(x)}")


def _finite(x):
    # JSON has no infinity.
    return None if x is None or not np.isfinite(x) else float(x)


def cmd_generate(args, out):
    inst = generate(args.family, args.m, args.n, args.p, RngSpec(args.seed, 0), args.r1, args.r2)
    files = save_instance(inst, out)
    print(f"{inst.label} seed={args.seed} -> " + " ".join(str(f) for f in files))
    return EXIT_OK


def cmd_solve(args, out):
    inst = _instance(args)
    rep = solve(inst, _config(args, args.seed))
    out.mkdir(parents=True, exist_ok=True)
    write_history(out / "history.csv", rep.history)
    summary = rep.summary()
    _dump(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if rep.converged else EXIT_MAX_ITERS


def _bench_run(family, dims, r1, r2, method, theta, seed, tol, max_iters, instance=None):
    inst = instance if instance is not None else generate(family, *dims, RngSpec(seed, 0), r1, r2)
    cfg = SolverConfig(method=method, theta=theta, tol_rrn=tol, max_iters=max_iters,
                       rng=RngSpec(seed, 1))
    return solve(inst, cfg, track_oracle=False)


def run_bench(family, dims, methods, thetas, repeats, seed_base=0, tol=1e-5, max_iters=100_000,
              r1=None, r2=None, workers=1, fixed_instance=False):
    """Run the battery and return a list of :class:`RunSummary`.

    Replicate ``r`` uses seed ``seed_base + r`` for both the instance (stream
    0) and the solver (stream 1); with `fixed_instance` every replicate
    shares the instance of ``seed_base``.  Speed-ups are relative to
    ``me-rgrk`` at the same theta when it is part of the battery.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    seeds = [seed_base + r for r in range(repeats)]
    shared = generate(family, *dims, RngSpec(seed_base, 0), r1, r2) if fixed_instance else None
    jobs = [(Method(mt), th, s) for th in thetas for mt in methods for s in seeds]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        reports = list(ex.map(
            lambda j: _bench_run(family, dims, r1, r2, j[0], j[1], j[2], tol, max_iters, shared),
            jobs))
    rows = []
    for idx in range(0, len(jobs), repeats):
        reps = reports[idx: idx + repeats]
        mt, th, _ = jobs[idx]
        its = [r.final_iter for r in reps]
        rows.append(RunSummary(
            method=mt.value, theta=th, alpha=reps[0].alpha, beta=reps[0].beta,
            it_mean=float(np.mean(its)), it_median=float(statistics.median(its)),
            cpu_mean_seconds=float(np.mean([r.elapsed_seconds for r in reps])),
            rrn_final_mean=float(np.mean([r.final_rrn_recomputed for r in reps])),
            repeats=repeats, seeds=seeds, converged_runs=sum(r.converged for r in reps),
        ))
    for row in rows:
        base = next((b for b in rows if b.method == Method.ME_RGRK.value and b.theta == row.theta), None)
        if base is not None and row.cpu_mean_seconds > 0.0:
            row.speedup_vs_baseline = base.cpu_mean_seconds / row.cpu_mean_seconds
    return rows


def cmd_bench(args, out):
    rows = run_bench(args.family, args.dims, args.methods, args.thetas, args.repeats, args.seed,
                     args.tol, args.max_iters, args.r1, args.r2, args.workers, args.fixed_instance)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        _dump(out / "bench.json", [asdict(r) for r in rows])
    else:
        with open(out / "bench.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "theta", "it", "cpu", "su"])
            for r in rows:
                su = "" if r.speedup_vs_baseline is None else f"{r.speedup_vs_baseline:.17g}"
                w.writerow([r.method, f"{r.theta:g}", r.it, f"{r.cpu_mean_seconds:.17g}", su])
    for r in rows:
        su = "-" if r.speedup_vs_baseline is None else f"{r.speedup_vs_baseline:.2f}"
        print(f"{r.method:8s} theta={r.theta:<4g} IT={r.it:<7d} median={r.it_median:<9g} "
              f"CPU={r.cpu_mean_seconds:.3f}s SU={su} converged={r.converged_runs}/{r.repeats}")
    return EXIT_OK if all(r.converged_runs == r.repeats for r in rows) else EXIT_MAX_ITERS


def bounds_report(A, B, alphas, betas):
    sb = spectral_bounds(A, B)
    report = {"spectral": sb.to_dict(), "methods": {}}
    for mt in (Method.PM_RGRK, Method.NM_RGRK):
        grid = []
        ranges = {}
        for a in alphas:
            ref = rate_factors(mt, a, 0.0, sb.rho_tilde)
            ranges[f"{a:g}"] = {"beta_min": 0.0, "beta_max": _finite(ref.beta_max),
                                "beta_max_stated": _finite(ref.beta_max_stated),
                                "empty": not (0.0 < a < 2.0 and ref.beta_max > 0.0)}
            for b in betas:
                f = rate_factors(mt, a, b, sb.rho_tilde)
                d = f.to_dict()
                d["beta_max"] = _finite(d["beta_max"])
                grid.append(d)
        report["methods"][mt.value] = {"beta_interval": ranges, "grid": grid}
    return report


def cmd_bounds(args, out):
    inst = _instance(args)
    rep = bounds_report(inst.A, inst.B, args.alphas, args.betas)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "bounds.json", rep)
    if args.format == "csv":
        with open(out / "bounds.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "alpha", "beta", "q1", "q2", "beta_max", "admissible"])
            for name, block in rep["methods"].items():
                for d in block["grid"]:
                    w.writerow([name, d["alpha"], d["beta"], f"{d['q1']:.17g}", f"{d['q2']:.17g}",
                                d["beta_max"], int(d["params_admissible"])])
    print(json.dumps(rep["spectral"], sort_keys=True))
    return EXIT_OK


def cmd_fit(args, out):
    if args.surface not in (1, 2):
        raise UsageError(f"surface must be 1 or 2, got {args.surface}")
    grid = sample_surface(args.surface, args.m, args.p)
    net, rep = fit_surface(grid, args.n, _config(args, args.seed), params=args.params,
                           knots=args.knots, rrn_norm=args.rrn_norm)
    out.mkdir(parents=True, exist_ok=True)
    write_grid_csv(out / "data.csv", grid.Q)
    mesh = eval_surface(net, u=np.linspace(*net.basis_u.domain, args.m),
                        v=np.linspace(*net.basis_v.domain, args.p))
    write_obj(out / "fit.obj", mesh)
    write_grid_csv(out / "fit.csv", mesh)
    write_history(out / "history.csv", rep.history)
    summary = fit_summary(args.surface, grid, args.n, rep)
    write_summary(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if rep.converged else EXIT_MAX_ITERS


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "bench": cmd_bench,
    "bounds": cmd_bounds,
    "fit": cmd_fit,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, Path(args.out))
    except (InvariantError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (UsageError, InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
