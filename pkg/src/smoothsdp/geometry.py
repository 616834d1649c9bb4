"""Riemannian geometry of the feasibility manifold {Y : A(Y Y^*) = b}.

The tangent space at a feasible Y is {V : <A_i Y, V> = 0 for all i} under
the real trace inner product.  With G the Gram matrix of the constraint
gradients, the orthogonal projector onto it is

    Proj_Y Z = Z - A^*(G^+ A(Z Y^*)) Y,

which is exact (the formula I - L^* (L L^*)^+ L) even when G is singular.
The cost g(Y) = <C Y, Y> then has Riemannian gradient 2 S Y and Hessian
V -> 2 Proj_Y(S V) with S = C - A^*(mu) cached on the `FactorPoint`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import (
    DiagonalConstraints,
    FactorPoint,
    ModelError,
    RetractionError,
    SdpProblem,
    TangencyError,
    _check_factor,
)
from .linalg import inner


class RetractionKind(enum.Enum):
    ROW_NORMALIZE = "row_normalize"
    USER_SUPPLIED = "user_supplied"


def _check_direction(point: FactorPoint, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if point.problem.field.dtype == np.dtype(np.float64) and np.iscomplexobj(v):
        raise ModelError("direction is complex but the problem field is real")
    v = np.ascontiguousarray(v, dtype=point.Y.dtype)
    if v.shape != point.Y.shape:
        raise ModelError(f"direction must have shape {point.Y.shape}, got {v.shape}")
    return v


def constraint_pairing(point: FactorPoint, z: np.ndarray) -> np.ndarray:
    """The m-vector of <A_i Y, Z>, i.e. A(Z Y^*)."""
    cons = point.problem.constraints
    if isinstance(cons, DiagonalConstraints):
        return np.einsum("ij,ij->i", point.Y.conj(), z).real
    return (point.left.reshape(cons.m, -1).conj() @ z.ravel()).real


def _adjoint_times_y(point: FactorPoint, w: np.ndarray) -> np.ndarray:
    """A^*(w) Y using the cached constraint-gradient stack."""
    if isinstance(point.problem.constraints, DiagonalConstraints):
        return w[:, None] * point.Y
    return np.tensordot(w, point.left, axes=1)


def tangent_project(point: FactorPoint, z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of Z onto the tangent space at the point."""
    z = _check_direction(point, z)
    w = point.gram_pinv @ constraint_pairing(point, z)
    return z - _adjoint_times_y(point, w)


def tangent_residual(point: FactorPoint, v: np.ndarray) -> float:
    """Norm of the constraint pairing; zero iff V is tangent."""
    return float(np.linalg.norm(constraint_pairing(point, v)))


def check_tangent(point: FactorPoint, v: np.ndarray, tol: float = 1e-10) -> None:
    """Raise `TangencyError` when V strays from the tangent space.

    The bar is relative: the pairing norm must stay below tol * ||V||.
    Violations are reported, never silently projected away.
    """
    res = tangent_residual(point, v)
    if res > tol * float(np.linalg.norm(v)):
        raise TangencyError(
            f"vector is not tangent: constraint pairing norm {res:.3e} "
            f"exceeds {tol:.1e} * ||V||"
        )


@dataclass(frozen=True)
class TangentVector:
    """A direction validated to lie in the tangent space at its base point."""

    point: FactorPoint
    V: np.ndarray

    def __post_init__(self):
        v = _check_direction(self.point, self.V)
        check_tangent(self.point, v)
        object.__setattr__(self, "V", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.V))


def objective(problem: SdpProblem, y: np.ndarray) -> float:
    """g(Y) = <C Y, Y> = <C, Y Y^*>."""
    y = _check_factor(problem, y)
    return inner(problem.C @ y, y)


def riemannian_gradient(point: FactorPoint) -> np.ndarray:
    """grad g(Y) = 2 S Y; tangent by construction of the multiplier."""
    return 2.0 * point.SY


def riemannian_hessian_apply(
    point: FactorPoint, v: np.ndarray, check: bool = True
) -> np.ndarray:
    """Hess g(Y)[V] = 2 Proj_Y(S V) for tangent V.

    With check=True (the default) a non-tangent V raises `TangencyError`;
    solvers that produce tangent vectors by construction may skip the check.
    """
    v = _check_direction(point, v)
    if check:
        check_tangent(point, v)
    return 2.0 * tangent_project(point, point.S @ v)


def second_order_form(point: FactorPoint, v: np.ndarray) -> float:
    """<V, S V>, which equals half of <V, Hess g(Y)[V]> for tangent V."""
    v = _check_direction(point, v)
    return inner(v, point.S @ v)


def retract(
    problem: SdpProblem,
    y: np.ndarray,
    v: np.ndarray,
    kind: RetractionKind = RetractionKind.ROW_NORMALIZE,
    user_retraction: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Map Y and a step V to a feasible point.

    ROW_NORMALIZE rescales each row of Y + V back to its target norm
    sqrt(b_i); it requires row-norm constraints with positive b and is a
    second-order retraction on the product of spheres.  retract(Y, 0)
    returns Y unchanged.
    """
    y = _check_factor(problem, y)
    v = np.ascontiguousarray(np.asarray(v), dtype=y.dtype)
    if v.shape != y.shape:
        raise ModelError(f"step must have shape {y.shape}, got {v.shape}")

    if kind is RetractionKind.USER_SUPPLIED:
        if user_retraction is None:
            raise RetractionError("USER_SUPPLIED retraction needs a callable")
        out = np.ascontiguousarray(np.asarray(user_retraction(y, v)), dtype=y.dtype)
        if out.shape != y.shape:
            raise RetractionError("user retraction returned a wrong-shaped factor")
        return out

    if not problem.constraints.row_norm:
        raise RetractionError(
            "row-normalize retraction requires row-norm (diagonal) constraints"
        )
    if np.any(problem.b <= 0):
        raise RetractionError("row-normalize retraction requires strictly positive b")
    if not np.any(v):
        return y.copy()
    z = y + v
    norms = np.sqrt(np.einsum("ij,ij->i", z.conj(), z).real)
    if np.any(norms == 0.0):
        raise RetractionError("a row of Y + V vanished; the retraction is undefined there")
    return z * (np.sqrt(problem.b) / norms)[:, None]
