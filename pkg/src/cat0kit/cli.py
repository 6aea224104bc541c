"""Command line driver.

Exit codes: 0 on success, 1 when a checked invariant fails (the JSON on stdout
then carries the witness), 2 on bad input or usage.  Reports go to stdout as
JSON with sorted keys; progress lines go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import cloud as cloud_mod
from .cloud import PointCloud, load_cloud, save_cloud
from .config import load_defaults
from .convergence import increasing_hull_convergence
from .errors import Cat0Error
from .frechet import (certify_in_hull, euclidean_mean, inductive_mean, load_problem, solver_result,
                      threading_search_mean)
from .geometry import parse_space, space_invariants
from .threader import convex_hull_cloud, estimate_degree, iterate_threading, thread_algebra_check

log = logging.getLogger("cat0kit")


def _emit(obj, pretty: bool) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2 if pretty else None) + "\n")


def _write_text(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _load(args, path) -> PointCloud:
    return load_cloud(path, args.dedup_eps)


def cmd_check(args) -> int:
    space = parse_space(args.space)
    log.info("checking %s on %d samples", space, args.trials)
    out = space_invariants(space, args.trials, args.seed, args.tol, args.box)
    _emit(out, args.pretty)
    return 0 if out["ok"] else 1


def cmd_thread(args) -> int:
    c = _load(args, args.input)
    log.info("threading %d points, %d iterations", len(c), args.iters)
    result, report = iterate_threading(c, args.iters, args.grid, args.cap, args.seed, args.pair_budget)
    if args.out:
        save_cloud(result, args.out)
    if args.csv:
        _write_text(args.csv, report.to_csv())
    _emit(report.to_json(args.timings), args.pretty)
    return 0


def cmd_degree(args) -> int:
    c = _load(args, args.input)
    log.info("estimating threading degree of %d points", len(c))
    est = estimate_degree(c, args.eps, args.grid, args.cap, args.n_max, args.seed, args.pair_budget)
    out = est.to_json()
    ok = True
    if est.hull_check is not None:
        ok = est.hull_check["max_outside"] <= est.eps + est.resolution
        out["hull_check"]["ok"] = ok
    _emit(out, args.pretty)
    return 0 if ok else 1


def cmd_hull(args) -> int:
    c = _load(args, args.input)
    log.info("hull cloud of %d points", len(c))
    hull, report = convex_hull_cloud(c, args.eps, args.grid, args.cap, args.n_max, args.seed, args.pair_budget)
    if args.out:
        save_cloud(hull, args.out)
    if args.csv:
        _write_text(args.csv, report.to_csv())
    out = report.to_json(args.timings)
    out["size"] = len(hull)
    _emit(out, args.pretty)
    return 0


def _solve(args, problem) -> int:
    kw = dict(eps=args.eps, grid_k=args.grid, cap=args.cap, n_max=args.n_max, seed=args.seed,
              pair_budget=args.pair_budget)
    method = getattr(args, "method", "search")
    if method == "closed":
        res = solver_result(problem, euclidean_mean(problem).array, 0, "closed")
    elif method == "inductive":
        res = inductive_mean(problem, args.iters, args.seed, args.order)
    else:
        res = threading_search_mean(problem, refine_steps=args.refine, **kw)
    if res.certificate is None and not args.no_certify:
        res.certificate = certify_in_hull(problem, res.minimizer, **kw)
    _emit(res.to_json(), args.pretty)
    return 0 if res.certificate is None or res.certificate.passed else 1


def cmd_mean(args) -> int:
    problem = load_problem(args.input).with_p(2)
    log.info("mean of %d points by %s", problem.array.shape[0], args.method)
    return _solve(args, problem)


def cmd_median(args) -> int:
    problem = load_problem(args.input).with_p(1)
    log.info("median of %d points", problem.array.shape[0])
    return _solve(args, problem)


def cmd_converge(args) -> int:
    target = _load(args, args.target)
    log.info("increasing hulls toward %d target points", len(target))
    rep = increasing_hull_convergence(target, args.steps, args.eps, args.grid, args.cap, args.n_max, args.seed,
                                      args.pair_budget)
    if args.csv:
        _write_text(args.csv, rep.to_csv())
    _emit(rep.to_json(), args.pretty)
    return 0 if rep.reached else 1


def cmd_algebra(args) -> int:
    s1, s2 = _load(args, args.s1), _load(args, args.s2)
    verdict = thread_algebra_check(s1, s2, args.samples, args.seed, args.tol, args.grid)
    _emit(verdict.to_json(), args.pretty)
    return 0 if verdict.ok else 1


def build_parser() -> argparse.ArgumentParser:
    d = load_defaults()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d.seed)
    common.add_argument("--threads", type=int, default=d.threads, help="worker cap for neighbour searches")
    common.add_argument("--pretty", action="store_true", help="indent the JSON report")
    common.add_argument("-v", "--verbose", action="store_true", help="progress lines on stderr")

    thr = argparse.ArgumentParser(add_help=False)
    thr.add_argument("--grid", type=int, default=d.grid_k, help="grid points per segment")
    thr.add_argument("--cap", type=int, default=d.cap, help="maximum cloud size")
    thr.add_argument("--eps", type=float, default=d.eps, help="stabilization threshold")
    thr.add_argument("--dedup-eps", type=float, default=d.dedup_eps)
    thr.add_argument("--pair-budget", type=int, default=d.pair_budget)
    thr.add_argument("--n-max", type=int, default=d.n_max)

    parser = argparse.ArgumentParser(prog="cat0kit", description="Threading, hulls and Fréchet means in CAT(0) model spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="sampled metric and curvature checks")
    p.add_argument("--space", required=True, help="euclidean:<d> | biquadrant | product(<s>,<s>)")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--box", type=float, default=10.0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("thread", parents=[common, thr], help="iterate the threading operator")
    p.add_argument("--input", required=True)
    p.add_argument("--iters", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.add_argument("--timings", action="store_true", help="include wall times in the JSON report")
    p.set_defaults(func=cmd_thread)

    p = sub.add_parser("degree", parents=[common, thr], help="estimate the threading degree")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_degree)

    p = sub.add_parser("hull", parents=[common, thr], help="hull cloud by iterated threading")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_hull)

    for name, func in (("mean", cmd_mean), ("median", cmd_median)):
        p = sub.add_parser(name, parents=[common, thr], help=f"Fréchet {name}")
        p.add_argument("--input", required=True)
        if name == "mean":
            p.add_argument("--method", choices=["closed", "inductive", "search"], default="search")
            p.add_argument("--iters", type=int, default=100_000, help="inductive steps")
            p.add_argument("--order", choices=["random", "cycle"], default="random")
        p.add_argument("--refine", type=int, default=50, help="refinement rounds for the search solver")
        p.add_argument("--no-certify", action="store_true", help="skip the hull certificate")
        p.set_defaults(func=func)

    p = sub.add_parser("converge", parents=[common, thr], help="hulls of growing subsets of a target")
    p.add_argument("--target", required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("algebra", parents=[common, thr], help="intersection and union rules for thr")
    p.add_argument("--s1", required=True)
    p.add_argument("--s2", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_algebra)
    return parser


def run(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except Cat0Error as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    cloud_mod.set_workers(args.threads)
    try:
        return args.func(args)
    except (Cat0Error, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())
