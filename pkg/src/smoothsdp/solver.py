"""Riemannian trust-region solver for the factored problem.

Outer loop: classical trust region on the manifold with ratio-based
acceptance, radius shrink x0.25 below the acceptance threshold, growth x2
when a high-quality step hits the boundary.  Inner loop: truncated
conjugate gradient with the usual three extra exits (negative curvature,
boundary, iteration cap).  When the gradient test passes, a Lanczos
estimate of the smallest tangent-restricted Hessian eigenvalue either
certifies approximate second-order stationarity or hands the solver an
explicit descent direction to escape along.

Accepted iterates stay exactly feasible (the retraction rescales rows) and
never increase the objective beyond the rounding-noise bias of the
acceptance test (see `SolverOptions.rho_regularization`).  All randomness
flows from the single seed in `SolverOptions`, so runs are reproducible
bit for bit on one platform.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .linalg import eigvalsh_tridiagonal, inner, kth_singular_value, operator_norm
from .model import (
    FactorPoint,
    FieldTag,
    ModelError,
    SdpProblem,
    build_factor_point,
)
from .geometry import (
    RetractionKind,
    retract,
    riemannian_hessian_apply,
    tangent_project,
)

import scipy.linalg


@dataclass
class SolverOptions:
    """Knobs for `solve`.

    eps_g / eps_h are the stationarity targets: the solver stops when
    ||grad g|| <= eps_g and (with second_order) the smallest tangent
    Hessian Rayleigh quotient of S is >= -eps_h.  Left at None they
    resolve to 1e-6 * max(1, ||C||_op * sqrt(R)) and
    1e-6 * max(1, ||C||_op) respectively.

    rho_regularization biases both sides of the acceptance ratio by
    rho_regularization * eps_mach * max(1, |value|) so that steps whose
    true decrease sits below the rounding error of the objective are
    judged by the model instead of by noise; 0 disables the bias.
    """

    eps_g: float | None = None
    eps_h: float | None = None
    max_outer_iters: int = 1000
    tcg_max_iters: int = 400
    tcg_kappa: float = 0.1
    tcg_theta: float = 1.0
    initial_radius: float | None = None
    max_radius: float | None = None
    rho_accept: float = 0.1
    rho_regularization: float = 1e3
    radius_shrink: float = 0.25
    radius_grow: float = 2.0
    rho_grow_threshold: float = 0.75
    second_order: bool = True
    lanczos_iters: int | None = None
    rank_tol: float = 1e-10
    retraction: RetractionKind = RetractionKind.ROW_NORMALIZE
    user_retraction: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    seed: int = 0

    def validate(self) -> None:
        for name in ("eps_g", "eps_h", "initial_radius", "max_radius"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be positive when given")
        if not (0.0 < self.tcg_kappa < 1.0):
            raise ModelError("tcg_kappa must lie in (0, 1)")
        if self.tcg_theta < 0.0:
            raise ModelError("tcg_theta must be nonnegative")
        if not (0.0 < self.rho_accept < 0.25):
            raise ModelError("rho_accept must lie in (0, 0.25)")
        if not (np.isfinite(self.rho_regularization) and self.rho_regularization >= 0.0):
            raise ModelError("rho_regularization must be finite and nonnegative")
        if not (0.0 < self.radius_shrink < 1.0):
            raise ModelError("radius_shrink must lie in (0, 1)")
        if self.radius_grow <= 1.0:
            raise ModelError("radius_grow must exceed 1")
        if self.max_outer_iters < 1 or self.tcg_max_iters < 1:
            raise ModelError("iteration caps must be positive")


@dataclass(frozen=True)
class SospReport:
    """Measured approximate-stationarity data at a point.

    hess_lower_bound estimates min <V, S V> over unit tangent V, i.e. half
    the smallest eigenvalue of the tangent-restricted Hessian; sigma_k is
    the smallest of the k singular values of Y.
    """

    grad_norm: float
    hess_lower_bound: float
    sigma_k: float
    feas_residual: float
    lanczos_iters_used: int
    min_direction: np.ndarray | None = dc_field(default=None, repr=False)


@dataclass(frozen=True)
class TcgResult:
    step: np.ndarray
    model_decrease: float
    stop_reason: str
    iterations: int


@dataclass(frozen=True)
class SolveResult:
    point: FactorPoint
    value: float
    grad_norm: float
    sosp: SospReport
    converged: bool
    stop_reason: str
    outer_iterations: int
    accepted_steps: int
    tcg_iterations: int
    wall_time_seconds: float
    eps_g: float
    eps_h: float
    final_radius: float
    gram_rank: int


def random_feasible_point(problem: SdpProblem, k: int, rng=0) -> np.ndarray:
    """Feasible factor with independent Gaussian rows rescaled to sqrt(b_i).

    Only row-norm (diagonal) constraint sets admit this sampler.
    """
    if not problem.constraints.row_norm:
        raise ModelError("no generic feasible-point sampler for dense constraints")
    if np.any(problem.b <= 0):
        raise ModelError("row-norm sampling requires strictly positive b")
    if k < 1:
        raise ModelError("rank k must be positive")
    rng = np.random.default_rng(rng)
    n = problem.n
    y = rng.standard_normal((n, k))
    if problem.field is FieldTag.COMPLEX:
        y = y + 1j * rng.standard_normal((n, k))
    y = np.ascontiguousarray(y, dtype=problem.field.dtype)
    norms = np.sqrt(np.einsum("ij,ij->i", y.conj(), y).real)
    norms[norms == 0.0] = 1.0
    return y * (np.sqrt(problem.b) / norms)[:, None]


def _boundary_step(z: np.ndarray, d: np.ndarray, radius: float) -> float:
    """Positive tau with ||z + tau d|| = radius (assumes ||z|| <= radius)."""
    dd = inner(d, d)
    zd = inner(z, d)
    zz = inner(z, z)
    disc = max(zd * zd - dd * (zz - radius * radius), 0.0)
    return (-zd + math.sqrt(disc)) / dd


def truncated_cg(
    point: FactorPoint,
    radius: float,
    opts: SolverOptions | None = None,
    grad: np.ndarray | None = None,
) -> TcgResult:
    """Steihaug-Toint truncated CG on the trust-region subproblem.

    Minimizes m(V) = <grad, V> + 0.5 <V, Hess[V]> over ||V|| <= radius in
    the tangent space.  Exits: negative_curvature and hit_boundary follow
    the current direction to the boundary, small_residual applies the
    ||r|| <= ||r0|| * min(kappa, ||r0||^theta) rule, max_iters returns the
    best interior iterate.  The returned model decrease is exact for the
    returned step (the running H-accumulator avoids an extra Hessian
    product).
    """
    opts = opts or SolverOptions()
    if grad is None:
        grad = 2.0 * point.SY
    g_norm = float(np.linalg.norm(grad))
    zero = np.zeros_like(point.Y)
    if g_norm == 0.0:
        return TcgResult(zero, 0.0, "zero_gradient", 0)

    z = zero
    hz = zero
    r = grad.copy()
    d = -r
    rr = g_norm * g_norm
    target = g_norm * min(opts.tcg_kappa, g_norm**opts.tcg_theta)

    def decrease(step: np.ndarray, h_step: np.ndarray) -> float:
        return -(inner(grad, step) + 0.5 * inner(step, h_step))

    for j in range(1, opts.tcg_max_iters + 1):
        hd = riemannian_hessian_apply(point, d, check=False)
        dhd = inner(d, hd)
        if dhd <= 0.0:
            tau = _boundary_step(z, d, radius)
            step = z + tau * d
            return TcgResult(step, decrease(step, hz + tau * hd), "negative_curvature", j)
        alpha = rr / dhd
        z_next = z + alpha * d
        if float(np.linalg.norm(z_next)) >= radius:
            tau = _boundary_step(z, d, radius)
            step = z + tau * d
            return TcgResult(step, decrease(step, hz + tau * hd), "hit_boundary", j)
        z = z_next
        hz = hz + alpha * hd
        r = r + alpha * hd
        rr_next = inner(r, r)
        if math.sqrt(rr_next) <= target:
            return TcgResult(z, decrease(z, hz), "small_residual", j)
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return TcgResult(z, decrease(z, hz), "max_iters", opts.tcg_max_iters)


def _random_tangent(point: FactorPoint, rng: np.random.Generator) -> np.ndarray | None:
    n, k = point.Y.shape
    for _ in range(8):
        z = rng.standard_normal((n, k))
        if point.problem.field is FieldTag.COMPLEX:
            z = z + 1j * rng.standard_normal((n, k))
        z = z.astype(point.Y.dtype, copy=False)
        q = tangent_project(point, z)
        if float(np.linalg.norm(q)) > 1e-10 * float(np.linalg.norm(z)):
            return q
    return None


def measure_sosp(
    point: FactorPoint,
    lanczos_iters: int | None = None,
    seed: int = 0,
    breakdown_tol: float = 1e-13,
) -> SospReport:
    """Lanczos estimate of the smallest tangent Rayleigh quotient of S.

    Runs Lanczos with full reorthogonalization on V -> Proj(S V) restricted
    to the tangent space (start vectors are projected, so the Krylov basis
    never leaves it and positive minima are reported faithfully).  On
    breakdown a fresh start orthogonal to the previous basis continues the
    sweep, so with lanczos_iters equal to the tangent dimension the
    estimate is an eigendecomposition up to roundoff.  Defaults to
    min(tangent dimension, 100) iterations.

    Rayleigh quotients from a Krylov space can only overestimate the true
    minimum, so treat the value as a measurement, not a certified bound.
    """
    if lanczos_iters is not None and lanczos_iters < 1:
        raise ModelError("lanczos_iters must be positive")
    n, k = point.Y.shape
    factor = 2 if point.problem.field is FieldTag.COMPLEX else 1
    dim_bound = factor * n * k - point.gram_rank
    grad_norm = point.grad_norm
    sigma_k = kth_singular_value(point.Y)
    if dim_bound <= 0:
        return SospReport(grad_norm, 0.0, sigma_k, point.feas_residual, 0, None)

    # The stall heuristic saves time in the default measurement mode; an
    # explicit budget means the caller wants the full sweep (e.g. budget =
    # tangent dimension for an exact eigendecomposition), so honor it.
    adaptive = lanczos_iters is None
    budget = min(dim_bound, 100) if adaptive else min(lanczos_iters, dim_bound)
    rng = np.random.default_rng(seed)

    basis: list[np.ndarray] = []
    runs: list[tuple[int, list[float], list[float]]] = []
    best_val = math.inf
    stall = 0

    while len(basis) < budget:
        q = _random_tangent(point, rng)
        if q is None:
            break
        for u in basis:
            q = q - inner(u, q) * u
        qn = float(np.linalg.norm(q))
        if qn <= 1e-10:
            break  # tangent space numerically exhausted
        q = q / qn
        start = len(basis)
        alphas: list[float] = []
        betas: list[float] = []
        q_prev = None
        beta_prev = 0.0
        scale = 1.0
        while len(basis) < budget:
            basis.append(q)
            w = tangent_project(point, point.S @ q)
            alpha = inner(q, w)
            alphas.append(alpha)
            w = w - alpha * q
            if q_prev is not None:
                w = w - beta_prev * q_prev
            for u in basis:
                w = w - inner(u, w) * u
            beta = float(np.linalg.norm(w))
            scale = max(scale, abs(alpha), beta)
            ritz = float(np.min(eigvalsh_tridiagonal(np.array(alphas), np.array(betas))))
            if ritz < best_val - 1e-13 * scale:
                best_val = ritz
                stall = 0
            else:
                stall += 1
            if beta <= breakdown_tol * scale:
                break
            if adaptive and stall >= 12 and len(alphas) >= 16:
                break  # smallest Ritz value has stopped moving
            betas.append(beta)
            q_prev, beta_prev = q, beta
            q = w / beta
        runs.append((start, alphas, betas))
        if adaptive and stall >= 12 and len(basis) >= 16:
            break

    if not runs:
        return SospReport(grad_norm, 0.0, sigma_k, point.feas_residual, 0, None)

    lam_min = math.inf
    direction = None
    for start, alphas, betas in runs:
        d = np.asarray(alphas)
        e = np.asarray(betas[: len(alphas) - 1])
        if len(d) == 1:
            vals, vecs = d.copy(), np.ones((1, 1))
        else:
            vals, vecs = scipy.linalg.eigh_tridiagonal(d, e)
        if float(vals[0]) < lam_min:
            lam_min = float(vals[0])
            coeffs = vecs[:, 0]
            direction = np.zeros_like(point.Y)
            for j, c in enumerate(coeffs):
                direction = direction + c * basis[start + j]
    direction = tangent_project(point, direction)
    dn = float(np.linalg.norm(direction))
    direction = direction / dn if dn > 0 else None
    return SospReport(grad_norm, lam_min, sigma_k, point.feas_residual, len(basis), direction)


def _next_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**62))


def solve(
    problem: SdpProblem,
    k: int,
    opts: SolverOptions | None = None,
    y0: np.ndarray | None = None,
    callback: Callable[[FactorPoint, dict], None] | None = None,
) -> SolveResult:
    """Run the trust-region solver from y0 or a seeded random feasible point.

    The callback, when given, fires once on the initial point and once per
    accepted iterate with an info dict (outer index, rho, radius, tCG stop
    reason, gradient norm); it is the supported way to observe the iterate
    path.  converged means the gradient target was met and, when the
    second-order phase is enabled, the Lanczos lower-bound target too.
    """
    opts = opts or SolverOptions()
    opts.validate()
    t0 = time.perf_counter()
    rng = np.random.default_rng(opts.seed)

    if opts.eps_g is None or opts.eps_h is None:
        c_norm = operator_norm(problem.C, seed=opts.seed)
    eps_g = opts.eps_g if opts.eps_g is not None else 1e-6 * max(1.0, c_norm * math.sqrt(problem.R))
    eps_h = opts.eps_h if opts.eps_h is not None else 1e-6 * max(1.0, c_norm)
    max_radius = opts.max_radius if opts.max_radius is not None else math.sqrt(problem.R)
    radius = opts.initial_radius if opts.initial_radius is not None else 0.1 * math.sqrt(problem.R)
    radius = min(radius, max_radius)

    if y0 is not None:
        y = y0
    else:
        y = random_feasible_point(problem, k, rng)
    point = build_factor_point(problem, y, rank_tol=opts.rank_tol)
    if callback is not None:
        callback(point, {"outer": 0, "event": "init", "radius": radius,
                         "grad_norm": point.grad_norm})

    sosp: SospReport | None = None
    converged = False
    stop_reason = "max_outer_iters"
    outer_done = 0
    accepted = 0
    tcg_total = 0
    radius_floor = 1e-13 * max_radius

    for outer in range(1, opts.max_outer_iters + 1):
        outer_done = outer
        grad = 2.0 * point.SY
        g_norm = float(np.linalg.norm(grad))
        step_reason = None

        if g_norm <= eps_g:
            if not opts.second_order:
                converged = True
                stop_reason = "converged"
                break
            sosp = measure_sosp(point, opts.lanczos_iters, seed=_next_seed(rng))
            if sosp.hess_lower_bound >= -eps_h or sosp.min_direction is None:
                converged = True
                stop_reason = "converged"
                break
            # escape phase: pit the negative-curvature step against tCG
            v = sosp.min_direction
            if inner(grad, v) > 0:
                v = -v
            step_nc = radius * v
            h_nc = riemannian_hessian_apply(point, step_nc, check=False)
            md_nc = -(inner(grad, step_nc) + 0.5 * inner(step_nc, h_nc))
            tcg = truncated_cg(point, radius, opts, grad=grad)
            tcg_total += tcg.iterations
            if tcg.model_decrease > md_nc:
                step, model_decrease, step_reason = tcg.step, tcg.model_decrease, tcg.stop_reason
            else:
                step, model_decrease, step_reason = step_nc, md_nc, "negative_curvature_escape"
            sosp = None  # stale once we move
        else:
            tcg = truncated_cg(point, radius, opts, grad=grad)
            tcg_total += tcg.iterations
            step, model_decrease, step_reason = tcg.step, tcg.model_decrease, tcg.stop_reason

        if not np.isfinite(model_decrease) or model_decrease <= 0.0:
            radius *= opts.radius_shrink
            if radius < radius_floor:
                stop_reason = "radius_collapse"
                break
            continue

        y_new = retract(problem, point.Y, step, opts.retraction, opts.user_retraction)
        candidate = build_factor_point(problem, y_new, rank_tol=opts.rank_tol)
        # Near a minimizer the true decrease drops below the rounding error
        # of the objective (a sum of O(n k) products); without the bias the
        # ratio turns into noise and rejections collapse the radius.
        rho_reg = opts.rho_regularization * float(np.finfo(float).eps) * max(1.0, abs(point.value))
        rho = (point.value - candidate.value + rho_reg) / (model_decrease + rho_reg)
        hit_edge = step_reason in ("negative_curvature", "hit_boundary", "negative_curvature_escape")
        # A ratio whose model decrease sits at the bias scale says nothing
        # about model fit, so it may keep the step but must contract the
        # radius: boundary jumps along rank-deficiency directions leave the
        # value unchanged to rounding while regenerating a gradient of order
        # ||C|| * radius^3, and only smaller steps break that cycle.
        informative = model_decrease > rho_reg

        if np.isfinite(rho) and rho >= opts.rho_accept and candidate.value <= point.value + rho_reg:
            point = candidate
            accepted += 1
            if callback is not None:
                callback(point, {"outer": outer, "event": "accept", "rho": rho,
                                 "radius": radius, "step_reason": step_reason,
                                 "grad_norm": point.grad_norm})
        if not np.isfinite(rho) or rho < opts.rho_accept or not informative:
            radius *= opts.radius_shrink
            if radius < radius_floor:
                stop_reason = "radius_collapse"
                break
        elif rho > opts.rho_grow_threshold and hit_edge:
            radius = min(radius * opts.radius_grow, max_radius)

    grad_norm = point.grad_norm
    if sosp is None:
        if opts.second_order:
            sosp = measure_sosp(point, opts.lanczos_iters, seed=_next_seed(rng))
        else:
            sosp = SospReport(grad_norm, math.nan, kth_singular_value(point.Y), point.feas_residual, 0, None)
    if stop_reason == "converged" and not opts.second_order:
        converged = grad_norm <= eps_g
    elif opts.second_order:
        converged = grad_norm <= eps_g and sosp.hess_lower_bound >= -eps_h

    return SolveResult(
        point=point,
        value=point.value,
        grad_norm=grad_norm,
        sosp=sosp,
        converged=converged,
        stop_reason=stop_reason,
        outer_iterations=outer_done,
        accepted_steps=accepted,
        tcg_iterations=tcg_total,
        wall_time_seconds=time.perf_counter() - t0,
        eps_g=eps_g,
        eps_h=eps_h,
        final_radius=radius,
        gram_rank=point.gram_rank,
    )
