"""A-posteriori optimality certificates from the matrix S = C - A^*(mu).

Everything here is deterministic given the point: with f* the optimal
value of the trace-bounded semidefinite relaxation and lam = lambda_min(S),

    <mu, b> + min(0, lam) R  <=  f*  <=  g(Y),
    g(Y) - f*  <=  -min(0, lam) R + (eps_g / 2) sqrt(R),

where eps_g is the measured gradient norm and R bounds tr(X) over the
feasible set.  The first line is a valid dual bound at any feasible Y; the
second uses <S Y, Y> = <grad, Y> / 2 <= (eps_g / 2) sqrt(R).

`theorem_gap_bound` and `unperturbed_gap_bound` are the perturbation-
analysis counterparts: the former spends an eta factor (calibrated, not
proven, through c0) to turn measured (eps_g, eps_H) into a gap bound, the
latter transfers a perturbed gap back to the unperturbed cost at the cost
of 2 ||W||_op R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import operator_norm
from .model import FactorPoint
from .solver import SospReport, measure_sosp


@dataclass(frozen=True)
class Certificate:
    """Numbers certifying how close a point is to solving the relaxation.

    grad_norm, hess_lower_bound and sigma_k echo the measurements the
    bounds were evaluated with; trace_bound, operator_bound, c_norm_op and
    zeta echo the problem constants.
    """

    value: float
    grad_norm: float
    hess_lower_bound: float
    sigma_k: float
    lambda_min_s: float
    mu_dot_b: float
    trace_bound: float
    operator_bound: float
    c_norm_op: float
    zeta: float
    deterministic_gap: float
    dual_lower_bound: float


def lambda_min_S(point: FactorPoint) -> float:
    """Smallest eigenvalue of S, by dense symmetric eigendecomposition."""
    return float(np.linalg.eigvalsh(point.S)[0])


def zeta(k_bound: float, trace_bound: float) -> float:
    """Curvature transfer factor K (2 + K R)^2."""
    return k_bound * (2.0 + k_bound * trace_bound) ** 2


def sosp_eigenvalue_bound(
    eps_h: float, k_bound: float, trace_bound: float, c_norm_op: float, sigma_k: float
) -> float:
    """Deterministic lower bound on lambda_min(S) at an (eps_g, eps_h) point.

    lambda_min(S) >= -eps_h - zeta(K, R) ||C||_op sigma_k(Y)^2: rank
    deficiency of Y converts tangent curvature control into spectral
    control of S.
    """
    return -(eps_h + zeta(k_bound, trace_bound) * c_norm_op * sigma_k**2)


def deterministic_gap_bound(eps_g: float, lam_min_s: float, trace_bound: float) -> float:
    """Upper bound on g(Y) - f* from measured gradient norm and lambda_min(S)."""
    return -min(0.0, lam_min_s) * trace_bound + (eps_g / 2.0) * math.sqrt(trace_bound)


def dual_lower_bound(mu_dot_b: float, lam_min_s: float, trace_bound: float) -> float:
    """Lower bound <mu, b> + min(0, lambda_min(S)) R on f*."""
    return mu_dot_b + min(0.0, lam_min_s) * trace_bound


def theorem_gap_bound(eps_g: float, eps_h: float, eta_val: float, trace_bound: float) -> float:
    """Gap bound (eps_h + eps_g^2 eta) R + (eps_g / 2) sqrt(R).

    eta comes from `smoothing.eta` and inherits its c0 calibration, so this
    is an estimate; prefer `deterministic_gap_bound` when certifying.
    """
    return (eps_h + eps_g**2 * eta_val) * trace_bound + (eps_g / 2.0) * math.sqrt(trace_bound)


def unperturbed_gap_bound(eps_f: float, w_norm_op: float, trace_bound: float) -> float:
    """Transfer a perturbed-cost gap eps_f back to the original cost.

    If g_{C+W}(Y) - f*_{C+W} <= eps_f then g_C(Y) - f*_C <= eps_f +
    2 ||W||_op R.
    """
    return eps_f + 2.0 * w_norm_op * trace_bound


def certify(
    point: FactorPoint,
    sosp: SospReport | None = None,
    lanczos_iters: int | None = None,
    seed: int = 0,
) -> Certificate:
    """Assemble the deterministic certificate at a point.

    Reuses a caller-supplied `SospReport` (e.g. from `solve`) or measures
    one; the gap bound plugs in the measured gradient norm.
    """
    if sosp is None:
        sosp = measure_sosp(point, lanczos_iters=lanczos_iters, seed=seed)
    lam = lambda_min_S(point)
    mu_b = float(np.dot(point.mu, point.problem.b))
    r = point.problem.R
    k_bound = point.problem.K
    return Certificate(
        value=point.value,
        grad_norm=point.grad_norm,
        hess_lower_bound=sosp.hess_lower_bound,
        sigma_k=sosp.sigma_k,
        lambda_min_s=lam,
        mu_dot_b=mu_b,
        trace_bound=r,
        operator_bound=k_bound,
        c_norm_op=operator_norm(point.problem.C),
        zeta=zeta(k_bound, r),
        deterministic_gap=deterministic_gap_bound(point.grad_norm, lam, r),
        dual_lower_bound=dual_lower_bound(mu_b, lam, r),
    )
