"""Command line front end.

Every command writes a JSON document (to ``--out`` or stdout).  Reports are
deterministic given the arguments; only ``runtime_ms`` varies between runs.

Exit codes: 0 success, 1 check failed, 2 usage, 3 inconclusive,
4 structure error, 5 numeric or capacity error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .certify import certify_matrix_vn_failure, check_scalar_vn
from .dilation import dilate_triple, verify_power_dilation
from .errors import InvalidInputError, VNDilateError
from .linalg import operator_norm, vector_to_dict
from .polynomials import MatrixPolynomial, random_scalar_polynomial, sup_norm_torus
from .tuples import (
    NILPOTENT_TOL,
    SCHEMES,
    CommutingTuple,
    CounterexampleParams,
    build_counterexample,
    decompose_nilpotents,
    random_commuting_contractions,
    split_scalar_nilpotent,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
WORKERS_ENV = "VNDILATE_WORKERS"
IMPOSSIBLE_FOUR = (
    "the input has 4 matrices; pass --indices i,j,k to select three. The four operators together "
    "admit no commuting isometric coextension (the matrix von Neumann inequality fails for them; "
    "see the certify-failure command), so only triples are dilated."
)


class UsageError(InvalidInputError):
    pass


# -- I/O ------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _emit(obj, path: str | None):
    text = dumps(obj)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _params(args) -> CounterexampleParams:
    return CounterexampleParams(args.theta1, args.theta2)


def _load_tuple(args) -> CommutingTuple:
    if args.input:
        return CommutingTuple.from_dict(_load_json(args.input))
    return build_counterexample(_params(args))


def _millis(start: float) -> int:
    return int(round((time.perf_counter() - start) * 1000))


# -- commands -------------------------------------------------------------------

def cmd_construct(args) -> int:
    _emit(build_counterexample(_params(args)).to_dict(), args.out)
    return EXIT_OK


def cmd_certify_failure(args) -> int:
    start = time.perf_counter()
    params = _params(args)
    T = None
    if args.input:
        T = CommutingTuple.from_dict(_load_json(args.input))
        meta = T.meta
        if "theta1" in meta and "theta2" in meta:
            params = CounterexampleParams(float(meta["theta1"]), float(meta["theta2"]))
    cert = certify_matrix_vn_failure(T, params, mesh=args.mesh, refine=args.refine_iters)
    _emit(cert.to_report(_millis(start)), args.out)
    return EXIT_OK if cert.status == "pass" else EXIT_INCONCLUSIVE


def _polynomials(args, n: int) -> list[MatrixPolynomial]:
    if args.poly:
        obj = _load_json(args.poly)
        items = obj if isinstance(obj, list) else [obj]
        return [MatrixPolynomial.from_dict(p) for p in items]
    if args.random:
        rng = np.random.default_rng(args.seed)
        return [random_scalar_polynomial(n, args.degree, rng) for _ in range(args.random)]
    raise UsageError("check-vn needs --poly FILE or --random COUNT")


def cmd_check_vn(args) -> int:
    start = time.perf_counter()
    T = _load_tuple(args)
    polys = _polynomials(args, len(T))
    reports, counts = [], {"yes": 0, "no": 0, "inconclusive": 0}
    for i, p in enumerate(polys):
        if p.num_vars != len(T):
            raise UsageError(f"polynomial {i} has {p.num_vars} variables but the tuple has {len(T)} matrices")
        t0 = time.perf_counter()
        rep = check_scalar_vn(T, p, mesh=args.mesh, refine=args.refine_iters)
        counts[rep.satisfied] += 1
        reports.append(rep.to_report(args.mesh, _millis(t0), params=dict(T.meta), index=i))
    gaps = [r["margin"] for r in reports]
    status = "fail" if counts["no"] else ("inconclusive" if counts["inconclusive"] else "pass")
    out = {
        "check": "scalar-vn-batch",
        "status": status,
        "aggregate": {
            "count": len(reports),
            "satisfied": counts["yes"],
            "violated": counts["no"],
            "inconclusive": counts["inconclusive"],
            "max_gap": max(gaps),
            "min_gap": min(gaps),
        },
        "mesh": args.mesh,
        "runtime_ms": _millis(start),
        "reports": reports,
    }
    _emit(out, args.out)
    return {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[status]


def _parse_indices(text: str, size: int) -> list[int]:
    try:
        idx = [int(s) for s in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"--indices must be comma-separated integers, got {text!r}") from exc
    if len(idx) != 3 or len(set(idx)) != 3 or not all(1 <= i <= size for i in idx):
        raise UsageError(f"--indices must name three distinct matrices among 1..{size}, got {text!r}")
    return [i - 1 for i in idx]


def cmd_dilate(args) -> int:
    start = time.perf_counter()
    T = _load_tuple(args)
    if args.indices:
        T = T.subset(_parse_indices(args.indices, len(T)))
    elif len(T) == 4:
        raise UsageError(IMPOSSIBLE_FOUR)
    if len(T) != 3:
        raise UsageError(f"dilate needs exactly 3 matrices, got {len(T)}")
    R = dilate_triple(T, N=args.window, D=args.scale_window, K=args.max_degree)
    check = verify_power_dilation(R, T, args.max_degree)
    if args.out:
        _emit(R.to_dict(), args.out)
    tol = max(args.tol, R.error_bound or 0.0)
    report = {
        "check": "power-dilation",
        "status": "pass" if check.max_error <= tol else "fail",
        "space_dim": R.space_dim,
        "window": R.window,
        "scale_window": R.scale_windows,
        "max_degree": R.max_degree,
        "max_error": check.max_error,
        "error_bound": R.error_bound,
        "tolerance": tol,
        "unitarity_residual": R.unitarity_residual,
        "commutation_residual": R.commutation_residual,
        "window_exceeded": check.window_exceeded,
        "route": check.route,
        "labels": T.labels,
        "error_table": [{"k": list(k), "err": e} for k, e in sorted(check.table.items())],
        "runtime_ms": _millis(start),
    }
    _emit(report, args.report)
    return EXIT_OK if report["status"] == "pass" else EXIT_FAIL


def cmd_decompose(args) -> int:
    T = _load_tuple(args)
    split = split_scalar_nilpotent(T)
    out = {
        "dim": T.dim,
        "count": len(T),
        "scalars": split.lams,
        "pure_scalar": split.pure_scalar_flags,
        "split_residual": split.residual,
        "commutation_residual": T.commutation_residual,
    }
    S = decompose_nilpotents(split.Ns, tol=args.tol)
    out.update({
        "orientation": S.orientation,
        "f": vector_to_dict(S.f),
        "vs": [vector_to_dict(v) for v in S.vs],
        "residual": S.residual,
    })
    _emit(out, args.out)
    return EXIT_OK


def cmd_sup_norm(args) -> int:
    if not args.poly:
        raise UsageError("sup-norm needs --poly FILE")
    start = time.perf_counter()
    p = MatrixPolynomial.from_dict(_load_json(args.poly))
    est = sup_norm_torus(p, mesh=args.mesh, refine=args.refine_iters)
    out = est.to_dict()
    out["runtime_ms"] = _millis(start)
    _emit(out, args.out)
    return EXIT_OK


# -- hunt -----------------------------------------------------------------------

def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def hunt_trial(job: tuple) -> dict:
    """One HuntRecord; module-level so worker processes can run it."""
    seed, trial, dim, count, scheme, degree, mesh, refine = job
    tseed = _trial_seed(seed, trial)
    T = random_commuting_contractions(dim, count, tseed, scheme)
    p = random_scalar_polynomial(count, degree, np.random.default_rng([seed, trial, 1]))
    rep = check_scalar_vn(T, p, mesh=mesh, refine=refine)
    verdict = {"yes": "satisfied", "no": "violation-candidate"}.get(rep.satisfied, "inconclusive")
    record = {
        "trial": trial,
        "seed": tseed,
        "scheme": scheme,
        "tuple": {
            "dim": dim,
            "count": count,
            "norms": [operator_norm(A) for A in T.matrices],
            "commutation_residual": T.commutation_residual,
        },
        "polynomial": {"degree": p.degree, "terms": len(p.terms), "l1_mass": p.coefficient_norm_sum()},
        "lhs_norm": rep.lhs_norm,
        "sup_lower": rep.sup_lower,
        "sup_certified_upper": rep.sup_certified_upper,
        "verdict": verdict,
    }
    if verdict == "violation-candidate":
        again = check_scalar_vn(T, p, mesh=2 * mesh, refine=refine)
        record["recheck"] = {"mesh": 2 * mesh, "sup_certified_upper": again.sup_certified_upper,
                             "satisfied": again.satisfied}
        if again.satisfied == "no":
            record["note"] = "candidate, re-verify independently before drawing conclusions"
        else:
            record["verdict"] = "satisfied" if again.satisfied == "yes" else "inconclusive"
    return record


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be positive, got {n}")
    return n


def cmd_hunt(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    jobs = [(args.seed, t, args.dim, args.count, args.scheme, args.degree, args.mesh, args.refine_iters)
            for t in range(args.trials)]
    workers = min(_workers(), len(jobs))
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(hunt_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [hunt_trial(j) for j in jobs]
    tally = {"satisfied": 0, "violation-candidate": 0, "inconclusive": 0}
    for r in records:
        tally[r["verdict"]] += 1
    lines = [json.dumps(_jsonable(r)) for r in records]
    summary = {"summary": tally, "trials": args.trials, "seed": args.seed, "scheme": args.scheme,
               "dim": args.dim, "count": args.count, "degree": args.degree, "mesh": args.mesh,
               "runtime_ms": _millis(start)}
    text = "\n".join(lines + [json.dumps(summary)]) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from exc
        if not value > 0 or (kind is float and not math.isfinite(value)):
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text!r}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="input", help="input tuple file (default: the built-in 4-tuple)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--theta1", type=float, default=math.pi / 4)
    common.add_argument("--theta2", type=float, default=math.pi / 4)
    common.add_argument("--mesh", type=_positive(int), default=64, help="grid points per circle")
    common.add_argument("--refine-iters", type=int, default=40)
    common.add_argument("--tol", type=_positive(float), default=NILPOTENT_TOL)
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="vndilate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="write the 3x3 counterexample 4-tuple")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("certify-failure", parents=[common], help="certify failure of the matrix inequality")
    p.set_defaults(func=cmd_certify_failure)

    p = sub.add_parser("check-vn", parents=[common], help="check the scalar inequality")
    p.add_argument("--poly", help="polynomial file (one object or an array)")
    p.add_argument("--random", type=_positive(int), help="number of random polynomials")
    p.add_argument("--degree", type=_positive(int), default=3)
    p.set_defaults(func=cmd_check_vn)

    p = sub.add_parser("dilate", parents=[common], help="commuting unitary power dilation of a triple")
    p.add_argument("--indices", help="three 1-based indices, e.g. 1,2,3")
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--scale-window", type=int, default=16)
    p.add_argument("--max-degree", type=int, default=4)
    p.add_argument("--report", help="verification report file (default: stdout)")
    p.set_defaults(func=cmd_dilate, tol=1e-12)

    p = sub.add_parser("decompose", parents=[common], help="scalar/nilpotent split and rank-one normal form")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("hunt", parents=[common], help="random search for scalar inequality violations")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--count", type=int, default=3, help="matrices per tuple")
    p.add_argument("--scheme", choices=SCHEMES, default="structured-nilpotent")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--degree", type=_positive(int), default=3)
    p.set_defaults(func=cmd_hunt)

    p = sub.add_parser("sup-norm", parents=[common], help="certified torus sup of a polynomial file")
    p.add_argument("--poly", help="polynomial file")
    p.set_defaults(func=cmd_sup_norm)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VNDilateError as exc:
        kind = "usage" if exc.exit_code == EXIT_USAGE else type(exc).__name__
        print(f"vndilate {args.command}: {kind}: {exc}", file=sys.stderr)
        return exc.exit_code
