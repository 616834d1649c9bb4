"""Phase retrieval via the PhaseCut semidefinite relaxation.

Given measurements b ~ |A z| of an unknown z in C^d through a known
A in C^{n x d}, the phases u on the unit torus minimize

    u^* C u,    C = diag(b) (I - A A^+) diag(b),

and z is recovered as A^+ (b . u).  The relaxation over X = u u^* >= 0
with diag(X) = 1 is exactly an `SdpProblem` with the diagonal constraint
set, trace bound R = n, and projector bound K = 1 (the Gram matrix of the
constraint gradients is the identity at every feasible factor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import hermitize, leading_right_singular_vector
from .model import (
    DiagonalConstraints,
    FieldTag,
    ModelError,
    RankDeficiencyError,
    SdpProblem,
)

# measurements are floored here to keep diag(b) invertible under noise
B_FLOOR = 0.01


@dataclass(frozen=True)
class PhasecutInstance:
    """One synthetic phase retrieval instance.

    b = max(|A z_true| + noise, B_FLOOR) with real Gaussian noise of
    standard deviation noise_sigma; z_true is kept for error reporting and
    may be None for instances loaded from external measurements.
    """

    d: int
    n: int
    noise_sigma: float
    seed: int
    A: np.ndarray
    b: np.ndarray
    z_true: np.ndarray | None

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.A), dtype=np.complex128)
        if a.shape != (self.n, self.d):
            raise ModelError(f"A must be ({self.n}, {self.d}), got {a.shape}")
        b = np.asarray(self.b, dtype=float)
        if b.shape != (self.n,):
            raise ModelError(f"b must have length {self.n}, got shape {b.shape}")
        if np.any(b <= 0):
            raise ModelError("measurements must be strictly positive")
        z = self.z_true
        if z is not None:
            z = np.ascontiguousarray(np.asarray(z), dtype=np.complex128)
            if z.shape != (self.d,):
                raise ModelError(f"z_true must have length {self.d}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "z_true", z)


def _standard_complex(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. standard complex Gaussian entries, E|z|^2 = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def generate_instance(
    d: int, oversampling: float = 10.0, noise_sigma: float = 0.0, seed: int = 0
) -> PhasecutInstance:
    """Draw z and A with i.i.d. standard complex Gaussian entries.

    n = ceil(oversampling * d); b = max(|A z| + eps, B_FLOOR) with eps
    i.i.d. real Gaussian of standard deviation noise_sigma.
    """
    if d < 1:
        raise ModelError("signal dimension d must be positive")
    if not (np.isfinite(oversampling) and oversampling > 0):
        raise ModelError("oversampling must be positive")
    if noise_sigma < 0:
        raise ModelError("noise_sigma must be nonnegative")
    n = int(math.ceil(oversampling * d))
    rng = np.random.default_rng(seed)
    z = _standard_complex(rng, d)
    a = _standard_complex(rng, (n, d))
    noise = rng.normal(0.0, noise_sigma, n)
    b = np.maximum(np.abs(a @ z) + noise, B_FLOOR)
    return PhasecutInstance(d=d, n=n, noise_sigma=float(noise_sigma), seed=int(seed),
                            A=a, b=b, z_true=z)


def generate_clean_instance(
    d: int, oversampling: float = 10.0, seed: int = 0, max_tries: int = 50
) -> PhasecutInstance:
    """Noiseless instance on which the measurement floor is inactive.

    Tries consecutive seeds until min |A z| > B_FLOOR, so b equals |A z|
    exactly and the true phases reach objective zero.
    """
    for t in range(max_tries):
        inst = generate_instance(d, oversampling, 0.0, seed + t)
        if float(np.min(np.abs(inst.A @ inst.z_true))) > B_FLOOR:
            return inst
    raise ModelError(f"no floor-free instance within {max_tries} seeds from {seed}")


def build_cost(inst: PhasecutInstance, rank_tol: float = 1e-12) -> np.ndarray:
    """C = diag(b) (I - A A^+) diag(b), self-adjoint exactly as stored.

    A must have full column rank: the pseudo-inverse is formed from the
    SVD and singular values at or below rank_tol times the largest signal
    rank deficiency.
    """
    n, d = inst.A.shape
    if n < d:
        raise RankDeficiencyError(f"A is {n} x {d}; need n >= d for full column rank")
    u, s, _ = np.linalg.svd(inst.A, full_matrices=False)
    if s[-1] <= rank_tol * s[0]:
        raise RankDeficiencyError(
            f"A is numerically rank deficient: sigma_min/sigma_max = {s[-1] / s[0]:.2e}"
        )
    complement = hermitize(np.eye(n) - u @ u.conj().T)
    return np.outer(inst.b, inst.b) * complement


def build_sdp(inst: PhasecutInstance) -> SdpProblem:
    """The unit-modulus relaxation: diagonal constraints, b = 1, R = n, K = 1."""
    n = inst.n
    return SdpProblem(
        field=FieldTag.COMPLEX,
        C=build_cost(inst),
        constraints=DiagonalConstraints(n),
        b=np.ones(n),
        R=float(n),
        K=1.0,
    )


def default_rank(n: int) -> int:
    """Factor rank ceil(sqrt(n)) used throughout the experiments."""
    if n < 1:
        raise ModelError("n must be positive")
    return int(math.ceil(math.sqrt(n)))


@dataclass(frozen=True)
class PhasecutSolution:
    """Rounded solution: unit-modulus phases, recovered signal, and the
    value <C, u u^*> = ||b . u - A z_hat||^2 of the rounded point."""

    u: np.ndarray
    z_hat: np.ndarray
    objective: float


def round_solution(inst: PhasecutInstance, y: np.ndarray) -> PhasecutSolution:
    """Round a factor to unit-modulus phases along its leading direction.

    Takes u_i = (Y v)_i / |(Y v)_i| with v the leading right singular
    vector of Y (entries that vanish round to 1), then recovers
    z_hat = A^+ (b . u) by least squares.
    """
    y = np.ascontiguousarray(np.asarray(y), dtype=np.complex128)
    if y.ndim != 2 or y.shape[0] != inst.n:
        raise ModelError(f"factor must be ({inst.n}, k), got shape {y.shape}")
    v = leading_right_singular_vector(y)
    w = y @ v
    mags = np.abs(w)
    u = np.where(mags > 0, w / np.where(mags > 0, mags, 1.0), 1.0 + 0.0j)
    target = inst.b * u
    z_hat, *_ = np.linalg.lstsq(inst.A, target, rcond=None)
    residual = target - inst.A @ z_hat
    objective = float(np.vdot(residual, residual).real)
    return PhasecutSolution(u=u, z_hat=z_hat, objective=objective)


def recovery_error(z_hat: np.ndarray, z_true: np.ndarray) -> float:
    """Relative error min over unit-modulus theta of ||theta z_hat - z_true||.

    The minimizer is theta = <z_true, z_hat>^- / |<z_true, z_hat>| (i.e.
    the phase of z_hat^* z_true); a zero overlap falls back to theta = 1.
    """
    z_hat = np.asarray(z_hat, dtype=np.complex128)
    z_true = np.asarray(z_true, dtype=np.complex128)
    if z_hat.shape != z_true.shape:
        raise ModelError("signal shapes differ")
    denom = float(np.linalg.norm(z_true))
    if denom == 0.0:
        raise ModelError("z_true is zero; relative error is undefined")
    overlap = np.vdot(z_hat, z_true)
    theta = overlap / abs(overlap) if abs(overlap) > 0 else 1.0 + 0.0j
    return float(np.linalg.norm(theta * z_hat - z_true)) / denom
