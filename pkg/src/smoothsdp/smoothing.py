"""Random self-adjoint perturbations and the quantities they control.

Perturbing the cost matrix C to C + W with a Gaussian self-adjoint W of
entry scale sigma_w buys, with high probability, a rank threshold above
which every approximate second-order critical point of the factored
problem is approximately optimal.  This module samples W, checks the
spectral-norm event the analysis conditions on, and evaluates the
closed-form quantities (kappa, the minimal rank, the curvature-to-gradient
factor eta, the small-singular-value bound).

The constant c0 in these formulas is a calibration constant, not a proven
one; everything downstream of it is labeled an estimate.  The rigorous
certificates live in `certify` and do not involve c0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import operator_norm
from .model import FieldTag, ModelError, SdpProblem


@dataclass(frozen=True)
class WignerSpec:
    """Distribution of the random self-adjoint perturbation.

    Entries on and above the diagonal are independent, zero mean:
    real field, variance sigma^2 everywhere; complex field, off-diagonal
    real and imaginary parts each with variance sigma^2 / 2 and a real
    diagonal with variance sigma^2.  Below-diagonal entries mirror by
    self-adjointness, exactly as stored.  seed is the default draw seed;
    `sample_wigner` can override it.
    """

    n: int
    sigma: float
    field: FieldTag = FieldTag.COMPLEX
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ModelError("matrix size must be positive")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ModelError("sigma must be a nonnegative float")


def sample_wigner(spec: WignerSpec, rng=None) -> np.ndarray:
    """Draw one matrix from `spec`; self-adjoint exactly as stored.

    rng may be a seed or a Generator; None uses spec.seed.
    """
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    n, sigma = spec.n, spec.sigma
    if spec.field is FieldTag.REAL:
        a = rng.normal(0.0, sigma, (n, n))
        upper = np.triu(a, 1)
        w = upper + upper.T
        idx = np.arange(n)
        w[idx, idx] = a[idx, idx]
        return w
    re = rng.normal(0.0, sigma / math.sqrt(2.0), (n, n))
    im = rng.normal(0.0, sigma / math.sqrt(2.0), (n, n))
    diag = rng.normal(0.0, sigma, n)
    upper = np.triu(re + 1j * im, 1)
    w = upper + upper.conj().T
    idx = np.arange(n)
    w[idx, idx] = diag
    return w


def wigner_norm_event(w: np.ndarray, sigma: float) -> bool:
    """Whether ||W||_op <= 3 sigma sqrt(n), the event the analysis assumes.

    For the distributions in `WignerSpec` this fails with probability at
    most exp(-n/2).
    """
    if sigma < 0:
        raise ModelError("sigma must be nonnegative")
    n = w.shape[0]
    return operator_norm(w) <= 3.0 * sigma * math.sqrt(n)


@dataclass(frozen=True)
class SmoothedParams:
    """Inputs to the closed-form perturbation-analysis quantities.

    n, m, R, K come from the problem; c_norm_op is ||C||_op of the
    unperturbed cost; sigma_w the perturbation scale; delta the failure
    probability budget; c0 the (non-rigorous) calibration constant.
    """

    n: int
    m: int
    R: float
    K: float
    c_norm_op: float
    sigma_w: float
    delta: float = 0.01
    c0: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ModelError("n and m must be positive")
        for name in ("R", "K", "c_norm_op"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be positive")
        if not (np.isfinite(self.sigma_w) and self.sigma_w >= 0):
            raise ModelError("sigma_w must be nonnegative")
        if not (0.0 < self.delta <= 1.0):
            raise ModelError("delta must lie in (0, 1]")
        if not (np.isfinite(self.c0) and self.c0 > 0):
            raise ModelError("c0 must be positive")

    @classmethod
    def from_problem(
        cls,
        problem: SdpProblem,
        sigma_w: float,
        delta: float = 0.01,
        c0: float = 1.0,
        c_norm_op: float | None = None,
    ) -> "SmoothedParams":
        if c_norm_op is None:
            c_norm_op = operator_norm(problem.C)
        return cls(problem.n, problem.m, problem.R, problem.K, c_norm_op, sigma_w, delta, c0)


def kappa(params: SmoothedParams) -> float:
    """Scale R K (||C||_op + 3 sigma_w sqrt(n)) of the perturbed problem."""
    p = params
    return p.R * p.K * (p.c_norm_op + 3.0 * p.sigma_w * math.sqrt(p.n))


def _log_term(params: SmoothedParams) -> float:
    p = params
    if p.sigma_w <= 0:
        raise ModelError("the perturbation-analysis formulas require sigma_w > 0")
    return math.log(1.0 + 6.0 * kappa(p) * math.sqrt(p.c0 * p.n) / p.sigma_w)


def min_rank(params: SmoothedParams) -> int:
    """Smallest factor rank the smoothed analysis asks for.

    Ceiling of 3 [log n + sqrt(log(1/delta)) + sqrt(m log(1 + 6 kappa
    sqrt(c0 n) / sigma_w))]; above it, approximate second-order points are
    approximately optimal with probability at least 1 - delta (up to the
    c0 calibration).
    """
    p = params
    rhs = 3.0 * (
        math.log(p.n) + math.sqrt(math.log(1.0 / p.delta)) + math.sqrt(p.m * _log_term(p))
    )
    return int(math.ceil(rhs))


def eta(params: SmoothedParams) -> float:
    """Factor converting squared gradient norm into a curvature allowance."""
    p = params
    return (
        p.c0
        * p.n
        * p.K
        * (2.0 + p.K * p.R) ** 2
        * (p.c_norm_op + 3.0 * p.sigma_w * math.sqrt(p.n))
        / (9.0 * p.m * p.sigma_w**2 * _log_term(p))
    )


def fosp_sigma_bound(eps_g: float, sigma_w: float, n: int, k: int, c0: float = 1.0) -> float:
    """High-probability bound (eps_g / sigma_w) sqrt(c0 n) / k on sigma_k(Y).

    Holds at approximate first-order points of the perturbed problem on the
    same event as `wigner_norm_event`, up to the c0 calibration.
    """
    if sigma_w <= 0:
        raise ModelError("fosp_sigma_bound requires sigma_w > 0")
    if k < 1:
        raise ModelError("rank k must be positive")
    return (eps_g / sigma_w) * math.sqrt(c0 * n) / k


def perturb_cost(problem: SdpProblem, sigma_w: float, rng=0) -> tuple[SdpProblem, np.ndarray]:
    """Return the problem with cost C + W and the drawn W itself."""
    if sigma_w < 0:
        raise ModelError("sigma_w must be nonnegative")
    w = sample_wigner(WignerSpec(problem.n, sigma_w, problem.field), rng)
    return problem.with_cost(problem.C + w), w
