"""Command line front end.

Subcommands: gen (write a phase retrieval instance), solve (factored SDP
solve of an instance, with optional random cost perturbation), certify
(re-certify a stored factor), perturb (emit C, W, C + W for an instance),
rank-bound (closed-form minimal rank and related quantities), bench
(timing sweep over instance sizes, CSV output).

Exit codes: 0 success, 1 when a solve finishes without converging, 2 on
usage or I/O errors.  SMOOTH_SDP_THREADS caps the threads used by the
underlying linear algebra libraries.  Reports are JSON with sorted keys;
rerunning a command with identical flags reproduces every non-timing
field byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import phasecut, serialize, smoothing
from .certificates import (
    certify,
    deterministic_gap_bound,
    lambda_min_S,
    unperturbed_gap_bound,
)
from .linalg import inner, operator_norm
from .model import FieldTag, ModelError, build_factor_point
from .solver import SolverOptions, measure_sosp, solve


def _thread_limit_context():
    raw = os.environ.get("SMOOTH_SDP_THREADS")
    if not raw:
        return nullcontext()
    try:
        limit = int(raw)
    except ValueError:
        raise ModelError(f"SMOOTH_SDP_THREADS must be an integer, got {raw!r}") from None
    if limit < 1:
        raise ModelError("SMOOTH_SDP_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


def _clean(value):
    """NaN -> None recursively, so reports stay strict JSON."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _write_report(path: str | None, record: dict) -> None:
    if path:
        serialize.write_json(path, _clean(record))


def cmd_gen(args) -> int:
    inst = phasecut.generate_instance(args.d, args.oversampling, args.noise_sigma, args.seed)
    serialize.write_json(args.out, serialize.instance_to_json(inst))
    print(f"wrote instance d={inst.d} n={inst.n} noise_sigma={inst.noise_sigma} "
          f"seed={inst.seed} -> {args.out}")
    return 0


def _solver_options(args, second_order: bool) -> SolverOptions:
    return SolverOptions(
        eps_g=args.eps_g,
        eps_h=args.eps_h,
        max_outer_iters=args.max_outer_iters,
        second_order=second_order,
        lanczos_iters=args.lanczos_iters,
        seed=args.seed,
    )


def cmd_solve(args) -> int:
    inst = serialize.instance_from_json(serialize.read_json(args.instance))
    problem = phasecut.build_sdp(inst)
    k = args.k if args.k is not None else phasecut.default_rank(inst.n)
    second_order = not args.no_second_order

    w = None
    solved_problem = problem
    if args.sigma_w > 0:
        solved_problem, w = smoothing.perturb_cost(problem, args.sigma_w, args.wigner_seed)

    result = solve(solved_problem, k, _solver_options(args, second_order))
    certificate = certify(result.point, sosp=result.sosp)
    solution = phasecut.round_solution(inst, result.point.Y)
    relative_error = (
        phasecut.recovery_error(solution.z_hat, inst.z_true)
        if inst.z_true is not None
        else None
    )

    outputs = {
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "outer_iterations": result.outer_iterations,
        "accepted_steps": result.accepted_steps,
        "tcg_iterations": result.tcg_iterations,
        "objective": result.value,
        "grad_norm": result.grad_norm,
        "hess_lower_bound": result.sosp.hess_lower_bound,
        "sigma_k": result.sosp.sigma_k,
        "lambda_min_S": certificate.lambda_min_s,
        "mu_dot_b": certificate.mu_dot_b,
        "deterministic_gap": certificate.deterministic_gap,
        "dual_lower_bound": certificate.dual_lower_bound,
        "gram_rank": result.gram_rank,
        "feas_residual": result.point.feas_residual,
        "rounded_objective": solution.objective,
        "relative_error": relative_error,
    }
    if w is not None:
        # certify the same factor against the original, unperturbed cost
        unperturbed = certify(build_factor_point(problem, result.point.Y))
        w_norm = operator_norm(w)
        outputs["objective_unperturbed"] = unperturbed.value
        outputs["dual_lower_bound_unperturbed"] = unperturbed.dual_lower_bound
        outputs["w_norm_op"] = w_norm
        outputs["wigner_norm_event"] = smoothing.wigner_norm_event(w, args.sigma_w)
        outputs["unperturbed_gap_bound"] = unperturbed_gap_bound(
            certificate.deterministic_gap, w_norm, problem.R
        )

    record = {
        "command": "solve",
        "params": {
            "instance": os.fspath(args.instance),
            "k": k,
            "eps_g": result.eps_g,
            "eps_h": result.eps_h,
            "sigma_w": args.sigma_w,
            "wigner_seed": args.wigner_seed,
            "seed": args.seed,
            "max_outer_iters": args.max_outer_iters,
            "second_order": second_order,
        },
        "outputs": outputs,
        "wall_time_seconds": result.wall_time_seconds,
    }
    _write_report(args.report, record)
    if args.y_path:
        serialize.write_json(args.y_path, serialize.factor_to_json(result.point.Y, problem.field))
    if args.solution_path:
        serialize.write_json(
            args.solution_path, _clean(serialize.solution_to_json(solution, relative_error))
        )

    print(f"solve: n={inst.n} k={k} converged={result.converged} "
          f"({result.stop_reason}, {result.outer_iterations} outer iterations, "
          f"{result.wall_time_seconds:.2f}s)")
    print(f"  objective={result.value:.6e} grad_norm={result.grad_norm:.3e} "
          f"gap<={certificate.deterministic_gap:.3e} dual>={certificate.dual_lower_bound:.6e}")
    if relative_error is not None:
        print(f"  rounded objective={solution.objective:.6e} relative_error={relative_error:.3e}")
    return 0 if result.converged else 1


def cmd_certify(args) -> int:
    inst = serialize.instance_from_json(serialize.read_json(args.instance))
    problem = phasecut.build_sdp(inst)
    if args.sigma_w > 0:
        problem, _ = smoothing.perturb_cost(problem, args.sigma_w, args.wigner_seed)
    y, field = serialize.factor_from_json(serialize.read_json(args.y_path))
    if field is not problem.field:
        raise ModelError("stored factor field does not match the problem field")
    point = build_factor_point(problem, y)
    sosp = measure_sosp(point, lanczos_iters=args.lanczos_iters, seed=args.seed)
    certificate = certify(point, sosp=sosp)
    record = {
        "command": "certify",
        "params": {
            "instance": os.fspath(args.instance),
            "y_path": os.fspath(args.y_path),
            "sigma_w": args.sigma_w,
            "wigner_seed": args.wigner_seed,
            "lanczos_iters": args.lanczos_iters,
            "seed": args.seed,
        },
        "outputs": {
            "value": certificate.value,
            "grad_norm": certificate.grad_norm,
            "hess_lower_bound": certificate.hess_lower_bound,
            "sigma_k": certificate.sigma_k,
            "lambda_min_S": certificate.lambda_min_s,
            "mu_dot_b": certificate.mu_dot_b,
            "deterministic_gap": certificate.deterministic_gap,
            "dual_lower_bound": certificate.dual_lower_bound,
            "trace_bound": certificate.trace_bound,
            "operator_bound": certificate.operator_bound,
            "c_norm_op": certificate.c_norm_op,
            "zeta": certificate.zeta,
            "feas_residual": point.feas_residual,
            "gram_rank": point.gram_rank,
            "lanczos_iters_used": sosp.lanczos_iters_used,
        },
    }
    _write_report(args.report, record)
    print(f"certify: objective={certificate.value:.6e} grad_norm={certificate.grad_norm:.3e} "
          f"lambda_min_S={certificate.lambda_min_s:.3e}")
    print(f"  gap<={certificate.deterministic_gap:.3e} "
          f"dual>={certificate.dual_lower_bound:.6e} hess_lb={certificate.hess_lower_bound:.3e}")
    return 0


def cmd_perturb(args) -> int:
    if args.sigma_w <= 0:
        raise ModelError("perturb requires --sigma-w > 0")
    inst = serialize.instance_from_json(serialize.read_json(args.instance))
    c = phasecut.build_cost(inst)
    w = smoothing.sample_wigner(
        smoothing.WignerSpec(inst.n, args.sigma_w, FieldTag.COMPLEX), args.seed
    )
    serialize.write_json(args.out, {
        "n": inst.n,
        "field": "complex",
        "sigma_w": args.sigma_w,
        "seed": args.seed,
        "C": serialize.encode_array(c),
        "W": serialize.encode_array(w),
        "C_tilde": serialize.encode_array(c + w),
    })
    print(f"wrote perturbed cost n={inst.n} sigma_w={args.sigma_w} seed={args.seed} -> {args.out}")
    return 0


def cmd_rank_bound(args) -> int:
    params = smoothing.SmoothedParams(
        n=args.n, m=args.m, R=args.R, K=args.K, c_norm_op=args.c_norm_op,
        sigma_w=args.sigma_w, delta=args.delta, c0=args.c0,
    )
    kappa_val = smoothing.kappa(params)
    k_min = smoothing.min_rank(params)
    eta_val = smoothing.eta(params)
    record = {
        "command": "rank-bound",
        "params": {
            "n": args.n, "m": args.m, "R": args.R, "K": args.K,
            "c_norm_op": args.c_norm_op, "sigma_w": args.sigma_w,
            "delta": args.delta, "c0": args.c0,
        },
        "outputs": {"kappa": kappa_val, "min_rank": k_min, "eta": eta_val},
    }
    _write_report(args.report, record)
    print(f"min_rank = {k_min}")
    print(f"kappa    = {kappa_val:.6e}")
    print(f"eta      = {eta_val:.6e}")
    print("note: these use the calibration constant c0; they are estimates, "
          "not certified bounds")
    return 0


def _bench_cell(payload: dict) -> dict:
    """One (d, repeat) timing cell; importable at top level for spawn."""
    with _thread_limit_context():
        inst = phasecut.generate_instance(
            payload["d"], payload["oversampling"], payload["noise_sigma"], payload["seed"]
        )
        problem = phasecut.build_sdp(inst)
        k = inst.n if payload["k_mode"] == "full" else phasecut.default_rank(inst.n)
        opts = SolverOptions(
            eps_g=payload["eps_g"],
            eps_h=payload["eps_h"],
            max_outer_iters=payload["max_outer_iters"],
            second_order=payload["second_order"],
            seed=payload["seed"],
        )
        result = solve(problem, k, opts)
        lam = lambda_min_S(result.point)
        gap = deterministic_gap_bound(result.grad_norm, lam, problem.R)
        return {
            "d": inst.d,
            "n": inst.n,
            "k": k,
            "seed": payload["seed"],
            "wall_time_s": result.wall_time_seconds,
            "objective": result.value,
            "grad_norm": result.grad_norm,
            "certified_gap": gap,
            "converged": result.converged,
        }


def cmd_bench(args) -> int:
    try:
        d_list = [int(tok) for tok in args.d_list.split(",") if tok.strip()]
    except ValueError:
        raise ModelError(f"--d-list must be comma-separated integers, got {args.d_list!r}") from None
    if not d_list or args.repeats < 1:
        raise ModelError("need at least one cell to benchmark")

    payloads = []
    for d in d_list:
        for rep in range(args.repeats):
            payloads.append({
                "d": d,
                "oversampling": args.oversampling,
                "noise_sigma": args.noise_sigma,
                "seed": args.seed + 104729 * d + rep,
                "k_mode": args.k_mode,
                "eps_g": args.eps_g,
                "eps_h": args.eps_h,
                "max_outer_iters": args.max_outer_iters,
                "second_order": args.second_order,
            })

    if args.parallel > 1:
        with ProcessPoolExecutor(
            max_workers=args.parallel, mp_context=get_context("spawn")
        ) as pool:
            rows = list(pool.map(_bench_cell, payloads))
    else:
        rows = [_bench_cell(p) for p in payloads]

    header = ["d", "n", "k", "seed", "wall_time_s", "objective", "grad_norm", "certified_gap"]
    with open(args.csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[h] for h in header])

    for d in d_list:
        times = [r["wall_time_s"] for r in rows if r["d"] == d]
        sample = next(r for r in rows if r["d"] == d)
        n_conv = sum(1 for r in rows if r["d"] == d and r["converged"])
        print(f"d={d} n={sample['n']} k={sample['k']} cells={len(times)} "
              f"converged={n_conv} median_wall_time={statistics.median(times):.3f}s")
    print(f"wrote {len(rows)} rows -> {args.csv}")
    return 0


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps-g", type=float, default=None,
                   help="gradient norm target (default: 1e-6 * max(1, ||C||_op sqrt(R)))")
    p.add_argument("--eps-h", type=float, default=None,
                   help="curvature target (default: 1e-6 * max(1, ||C||_op))")
    p.add_argument("--max-outer-iters", type=int, default=1000)
    p.add_argument("--lanczos-iters", type=int, default=None,
                   help="Lanczos budget for curvature measurement "
                        "(default: min(tangent dimension, 100))")
    p.add_argument("--seed", type=int, default=0, help="solver seed (initial point, Lanczos)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smooth-sdp",
        description="Low-rank factored solver for trace-constrained SDPs "
                    "with a PhaseCut phase retrieval front end.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic phase retrieval instance")
    p.add_argument("--d", type=int, required=True, help="signal dimension")
    p.add_argument("--oversampling", type=float, default=10.0, help="n = ceil(oversampling * d)")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "--out-path", dest="out", required=True, help="instance JSON path")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve an instance by low-rank factorization")
    p.add_argument("--instance", "--instance-path", dest="instance", required=True)
    p.add_argument("--k", type=int, default=None, help="factor rank (default: ceil(sqrt(n)))")
    p.add_argument("--sigma-w", type=float, default=0.0,
                   help="scale of the random cost perturbation (0 disables)")
    p.add_argument("--wigner-seed", type=int, default=0)
    p.add_argument("--no-second-order", action="store_true",
                   help="stop at the gradient test; skip curvature measurement")
    _add_solver_flags(p)
    p.add_argument("--report", "--report-path", dest="report", default=None,
                   help="write the run record JSON here")
    p.add_argument("--y-path", default=None, help="write the solution factor JSON here")
    p.add_argument("--solution-path", default=None,
                   help="write the rounded phase retrieval solution JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="re-certify a stored factor")
    p.add_argument("--instance", "--instance-path", dest="instance", required=True)
    p.add_argument("--y-path", required=True, help="factor JSON written by solve --y-path")
    p.add_argument("--sigma-w", type=float, default=0.0,
                   help="rebuild the perturbed cost this factor was solved against")
    p.add_argument("--wigner-seed", type=int, default=0)
    p.add_argument("--lanczos-iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", "--report-path", dest="report", default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("perturb", help="emit C, W and C + W for an instance")
    p.add_argument("--instance", "--instance-path", dest="instance", required=True)
    p.add_argument("--sigma-w", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "--out-path", dest="out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("rank-bound", help="closed-form minimal rank for a perturbed problem")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--sigma-w", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--c-norm-op", "--c-norm", dest="c_norm_op", type=float, required=True)
    p.add_argument("--report", "--report-path", dest="report", default=None)
    p.set_defaults(func=cmd_rank_bound)

    p = sub.add_parser("bench", help="timing sweep over instance sizes")
    p.add_argument("--d-list", required=True, help="comma-separated signal dimensions")
    p.add_argument("--oversampling", type=float, default=10.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--repeats", type=int, default=4, help="independent cells per dimension")
    p.add_argument("--k-mode", choices=("sqrt", "full"), default="sqrt",
                   help="factor rank: ceil(sqrt(n)) or the full n")
    p.add_argument("--second-order", action="store_true",
                   help="also require the curvature test during the timed solve "
                        "(off by default; bench times first-order convergence)")
    p.add_argument("--eps-g", type=float, default=None)
    p.add_argument("--eps-h", type=float, default=None)
    p.add_argument("--max-outer-iters", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0,
                   help="base seed; cell seeds are seed + 104729 * d + repeat")
    p.add_argument("--csv", "--csv-path", dest="csv", required=True, help="output CSV path")
    p.add_argument("--parallel", type=int, default=1,
                   help="run this many cells concurrently in separate processes")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit_context():
            return args.func(args)
    except (ModelError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
