"""Problem data for trace-constrained semidefinite programs in factored form.

A problem is

    minimize  <C, X>   subject to  A(X) = b,  X >= 0,

over real symmetric or complex Hermitian X, where A(X)_i = <A_i, X> with
self-adjoint constraint matrices A_i and the real trace inner product
<A, B> = Re tr(A^* B).  The search space is factored as X = Y Y^* with
Y in F^{n x k}, so the feasible set becomes the smooth manifold
{Y : A(Y Y^*) = b} whenever the constraint gradients stay independent.

`FactorPoint` bundles a factor Y with every first-order quantity the
geometry and the certificates need: the Gram matrix G_ij = <A_i Y, A_j Y>
of the constraint gradients, its pseudo-inverse, the least-squares
multiplier mu = G^+ A(C Y Y^*), and the certificate matrix
S = C - A^*(mu).  All caches are computed at construction; instances are
immutable and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np

from .linalg import hermitize, inner, is_self_adjoint, self_adjoint_pinv


class ModelError(ValueError):
    """Invalid problem data: shapes, dtypes, or broken invariants."""


class TangencyError(ModelError):
    """A vector expected to be tangent at the base point is not."""


class RetractionError(ModelError):
    """The requested retraction is unavailable for these constraints."""


class RankDeficiencyError(ModelError):
    """A matrix that must have full column rank does not."""


class FieldTag(enum.Enum):
    """Scalar field of the problem data."""

    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float64 if self is FieldTag.REAL else np.complex128)


def _as_field_matrix(a: np.ndarray, field: FieldTag, name: str) -> np.ndarray:
    a = np.asarray(a)
    if field is FieldTag.REAL and np.iscomplexobj(a):
        raise ModelError(f"{name} is complex but the problem field is real")
    return np.ascontiguousarray(a, dtype=field.dtype)


class DiagonalConstraints:
    """Constraints A_i = e_i e_i^*, i = 1..n, so A(X) = Re diag(X).

    This is the constraint set of unit-modulus / row-norm problems; m = n
    and the feasible factors are exactly the matrices with prescribed row
    norms.  All operator applications are O(n k) instead of O(m n k).
    """

    def __init__(self, n: int):
        if n < 1:
            raise ModelError("need at least one constraint")
        self.n = int(n)
        self.m = int(n)
        self.row_norm = True

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(np.diagonal(x).real)

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        return np.diag(np.asarray(w, dtype=float))

    def to_dense(self, field: FieldTag) -> np.ndarray:
        mats = np.zeros((self.n, self.n, self.n), dtype=field.dtype)
        idx = np.arange(self.n)
        mats[idx, idx, idx] = 1.0
        return mats

    def __eq__(self, other) -> bool:
        return isinstance(other, DiagonalConstraints) and other.n == self.n

    def __repr__(self) -> str:
        return f"DiagonalConstraints(n={self.n})"


class DenseConstraints:
    """Constraint matrices stored as an explicit (m, n, n) stack."""

    def __init__(self, matrices: np.ndarray):
        mats = np.asarray(matrices)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ModelError(f"constraint stack must be (m, n, n), got {mats.shape}")
        if mats.shape[0] < 1:
            raise ModelError("need at least one constraint")
        for i in range(mats.shape[0]):
            if not is_self_adjoint(mats[i]):
                raise ModelError(f"constraint matrix {i} is not self-adjoint as stored")
        self.matrices = mats
        self.m = int(mats.shape[0])
        self.n = int(mats.shape[1])
        self.row_norm = False

    def apply(self, x: np.ndarray) -> np.ndarray:
        flat = self.matrices.reshape(self.m, -1)
        return np.ascontiguousarray((flat.conj() @ x.ravel()).real)

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.tensordot(w, self.matrices, axes=1)

    def left_apply(self, y: np.ndarray) -> np.ndarray:
        """Stack of A_i @ y, shape (m, n, k)."""
        return self.matrices @ y

    def to_dense(self, field: FieldTag) -> np.ndarray:
        return _as_field_matrix(self.matrices, field, "constraints")

    def __eq__(self, other) -> bool:
        return isinstance(other, DenseConstraints) and np.array_equal(
            other.matrices, self.matrices
        )

    def __repr__(self) -> str:
        return f"DenseConstraints(m={self.m}, n={self.n})"


def diagonal_constraints_if_possible(mats: np.ndarray) -> DiagonalConstraints | None:
    """Detect an (m, n, n) stack that is exactly A_i = e_i e_i^*."""
    m, n, _ = mats.shape
    if m != n:
        return None
    expected = np.zeros((n, n, n), dtype=mats.dtype)
    idx = np.arange(n)
    expected[idx, idx, idx] = 1.0
    if np.array_equal(mats, expected):
        return DiagonalConstraints(n)
    return None


@dataclass(frozen=True)
class SdpProblem:
    """Immutable problem data.

    R bounds tr(X) over the feasible set; K bounds the operator norm of
    A^* G^+ A uniformly over feasible points.  Both enter only the
    certificates and the perturbation-analysis formulas, never the solver
    iterations, so loose values degrade bounds but not iterates.
    """

    field: FieldTag
    C: np.ndarray
    constraints: DiagonalConstraints | DenseConstraints
    b: np.ndarray
    R: float
    K: float

    def __post_init__(self):
        c = _as_field_matrix(self.C, self.field, "C")
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ModelError(f"C must be square, got shape {c.shape}")
        if not is_self_adjoint(c):
            raise ModelError("C must be self-adjoint exactly as stored; hermitize it first")
        if self.constraints.n != c.shape[0]:
            raise ModelError(
                f"constraints act on n={self.constraints.n} but C is {c.shape[0]} x {c.shape[0]}"
            )
        if isinstance(self.constraints, DenseConstraints):
            if self.constraints.matrices.dtype != self.field.dtype:
                raise ModelError("constraint matrices must match the problem field dtype")
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 1 or b.shape[0] != self.constraints.m:
            raise ModelError(f"b must have length m={self.constraints.m}, got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ModelError("b must be finite")
        if not (np.isfinite(self.R) and self.R > 0):
            raise ModelError("trace bound R must be positive and finite")
        if not (np.isfinite(self.K) and self.K > 0):
            raise ModelError("projector bound K must be positive and finite")
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "K", float(self.K))

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.constraints.m

    def with_cost(self, c_new: np.ndarray) -> "SdpProblem":
        return SdpProblem(self.field, c_new, self.constraints, self.b, self.R, self.K)


def _check_factor(problem: SdpProblem, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if problem.field is FieldTag.REAL and np.iscomplexobj(y):
        raise ModelError("factor Y is complex but the problem field is real")
    y = np.ascontiguousarray(y, dtype=problem.field.dtype)
    if y.ndim != 2 or y.shape[0] != problem.n:
        raise ModelError(f"factor Y must be ({problem.n}, k), got shape {y.shape}")
    return y


def apply_constraint_operator(problem: SdpProblem, x: np.ndarray) -> np.ndarray:
    """A(X): the m-vector of constraint values <A_i, X>."""
    x = np.asarray(x)
    if x.shape != (problem.n, problem.n):
        raise ModelError(f"X must be ({problem.n}, {problem.n}), got {x.shape}")
    return problem.constraints.apply(x)

def apply_adjoint(problem: SdpProblem, w: np.ndarray) -> np.ndarray:
    """A^*(w) = sum_i w_i A_i, self-adjoint exactly as stored."""
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.m,):
        raise ModelError(f"multiplier must have length m={problem.m}, got shape {w.shape}")
    out = problem.constraints.adjoint(w)
    return out.astype(problem.field.dtype, copy=False)


def gram_matrix(problem: SdpProblem, y: np.ndarray) -> np.ndarray:
    """Gram matrix G_ij = <A_i Y, A_j Y> of the constraint gradients at Y."""
    y = _check_factor(problem, y)
    cons = problem.constraints
    if isinstance(cons, DiagonalConstraints):
        row_sq = np.einsum("ij,ij->i", y.conj(), y).real
        return np.diag(row_sq)
    left = cons.left_apply(y).reshape(cons.m, -1)
    g = (left.conj() @ left.T).real
    return (g + g.T) / 2.0


def gram_pseudo_inverse(g: np.ndarray, rank_tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Pseudo-inverse and numerical rank of a Gram matrix.

    Computed by symmetric eigendecomposition; eigenvalues at or below
    rank_tol times the largest one are treated as zero.
    """
    g = np.asarray(g, dtype=float)
    return self_adjoint_pinv(g, rank_tol=rank_tol)


def feasibility_residual(problem: SdpProblem, y: np.ndarray) -> float:
    """Euclidean norm of A(Y Y^*) - b."""
    y = _check_factor(problem, y)
    cons = problem.constraints
    if isinstance(cons, DiagonalConstraints):
        vals = np.einsum("ij,ij->i", y.conj(), y).real
    else:
        left = cons.left_apply(y).reshape(cons.m, -1)
        vals = (left.conj() @ y.ravel()).real
    return float(np.linalg.norm(vals - problem.b))


@dataclass(frozen=True)
class FactorPoint:
    """A factor Y with all first-order caches, computed at construction.

    S = C - A^*(mu) is the certificate matrix: 2 S Y is the Riemannian
    gradient of g(Y) = <C Y, Y> and the sign of its smallest eigenvalue
    drives every a-posteriori bound.
    """

    problem: SdpProblem
    Y: np.ndarray
    gram: np.ndarray
    gram_pinv: np.ndarray
    gram_rank: int
    mu: np.ndarray
    S: np.ndarray
    SY: np.ndarray
    value: float
    feas_residual: float
    left: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.Y.shape[1]

    @property
    def grad_norm(self) -> float:
        return 2.0 * float(np.linalg.norm(self.SY))


def build_factor_point(
    problem: SdpProblem, y: np.ndarray, rank_tol: float = 1e-10
) -> FactorPoint:
    """Assemble a `FactorPoint` at Y (Y need not be feasible).

    The multiplier is the least-squares solution mu = G^+ A(C Y Y^*), which
    makes 2 S Y the orthogonal projection of the ambient gradient 2 C Y
    onto the tangent space even when G is singular.
    """
    y = _check_factor(problem, y)
    cons = problem.constraints
    cy = problem.C @ y
    value = inner(cy, y)

    if isinstance(cons, DiagonalConstraints):
        left = None
        row_sq = np.einsum("ij,ij->i", y.conj(), y).real
        gram = np.diag(row_sq)
        scale = float(np.max(np.abs(row_sq))) if row_sq.size else 0.0
        keep = np.abs(row_sq) > rank_tol * scale
        inv = np.zeros_like(row_sq)
        inv[keep] = 1.0 / row_sq[keep]
        gram_pinv = np.diag(inv)
        gram_rank = int(np.count_nonzero(keep))
        c_vec = np.einsum("ij,ij->i", y.conj(), cy).real
        mu = inv * c_vec
        s = problem.C.copy()
        idx = np.arange(problem.n)
        s[idx, idx] -= mu
        sy = cy - mu[:, None] * y
        feas = float(np.linalg.norm(row_sq - problem.b))
    else:
        left = cons.left_apply(y)
        flat = left.reshape(cons.m, -1)
        gram = (flat.conj() @ flat.T).real
        gram = (gram + gram.T) / 2.0
        gram_pinv, gram_rank = self_adjoint_pinv(gram, rank_tol=rank_tol)
        c_vec = (flat.conj() @ cy.ravel()).real
        mu = gram_pinv @ c_vec
        s = hermitize(problem.C - cons.adjoint(mu))
        sy = cy - np.tensordot(mu, left, axes=1)
        feas = float(np.linalg.norm((flat.conj() @ y.ravel()).real - problem.b))

    return FactorPoint(
        problem=problem,
        Y=y,
        gram=gram,
        gram_pinv=gram_pinv,
        gram_rank=gram_rank,
        mu=mu,
        S=s,
        SY=sy,
        value=value,
        feas_residual=feas,
        left=left,
    )


def estimate_projector_bound(problem: SdpProblem, sample_points: list[np.ndarray]) -> float:
    """Estimate of K: max over the samples of ||A^* G^+ A||_op.

    This is an estimate from the supplied points only, not a certified
    bound over the whole feasible set; callers who need a guarantee must
    supply K from problem structure (for row-norm constraints with b = 1
    the exact value is 1).
    """
    if not sample_points:
        raise ModelError("need at least one sample point")
    cons = problem.constraints
    if isinstance(cons, DiagonalConstraints):
        h = np.eye(cons.m)
    else:
        flat = cons.matrices.reshape(cons.m, -1)
        h = (flat.conj() @ flat.T).real
        h = (h + h.T) / 2.0
    hw, hv = np.linalg.eigh(h)
    hw = np.clip(hw, 0.0, None)
    h_half = (hv * np.sqrt(hw)) @ hv.T
    worst = 0.0
    for y in sample_points:
        g = gram_matrix(problem, y)
        g_pinv, _ = gram_pseudo_inverse(g)
        mid = h_half @ g_pinv @ h_half
        worst = max(worst, float(np.max(np.linalg.eigvalsh((mid + mid.T) / 2.0))))
    return worst
