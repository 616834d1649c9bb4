"""Shared helpers and oracles for the test suite.

The helpers here are deliberately independent of the package's fast paths:
tangent bases are built by projecting ambient unit directions and
orthonormalizing through an SVD, and quadratic forms are assembled densely
on that basis.  Tests compare the package's projector shortcuts and Lanczos
measurements against these slow-but-obvious constructions.
"""

from __future__ import annotations

import numpy as np
import pytest

from smoothsdp import (
    DenseConstraints,
    DiagonalConstraints,
    FieldTag,
    SdpProblem,
    SolverOptions,
    build_factor_point,
    build_sdp,
    default_rank,
    generate_clean_instance,
    solve,
    tangent_project,
)
from smoothsdp.linalg import hermitize, inner


def random_self_adjoint(n, field, rng, scale=1.0):
    """Dense self-adjoint matrix with O(scale) Gaussian entries."""
    a = rng.standard_normal((n, n))
    if field is FieldTag.COMPLEX:
        a = a + 1j * rng.standard_normal((n, n))
    return hermitize(scale * a).astype(field.dtype)


def random_factor(n, k, field, rng):
    y = rng.standard_normal((n, k))
    if field is FieldTag.COMPLEX:
        y = y + 1j * rng.standard_normal((n, k))
    return np.ascontiguousarray(y, dtype=field.dtype)


def random_diagonal_problem(n, k, field, seed=0, scale=1.0):
    """Row-norm constrained problem plus a feasible factor.

    b is set to the row norms of a random factor, so (problem, y) is
    feasible by construction; R = sum(b) is the exact trace, and
    K = 1/min(b) is the exact projector bound for diagonal constraints.
    """
    rng = np.random.default_rng(seed)
    y = random_factor(n, k, field, rng)
    b = np.einsum("ij,ij->i", y.conj(), y).real.copy()
    c = random_self_adjoint(n, field, rng, scale)
    problem = SdpProblem(
        field=field,
        C=c,
        constraints=DiagonalConstraints(n),
        b=b,
        R=float(np.sum(b)),
        K=float(1.0 / np.min(b)),
    )
    return problem, y


def random_dense_problem(n, m, k, field, seed=0):
    """Dense-constraint problem feasible at a returned random factor.

    b_i is defined as <A_i Y, Y> at the random factor, so the pair is
    feasible by construction.  R and K are valid placeholders, not tight.
    """
    rng = np.random.default_rng(seed)
    y = random_factor(n, k, field, rng)
    mats = np.stack([random_self_adjoint(n, field, rng) for _ in range(m)])
    constraints = DenseConstraints(mats)
    b = np.array([inner(mats[i] @ y, y) for i in range(m)])
    c = random_self_adjoint(n, field, rng)
    trace = float(inner(y, y))
    problem = SdpProblem(
        field=field,
        C=c,
        constraints=constraints,
        b=b,
        R=2.0 * trace,
        K=1.0,
    )
    return problem, y


def phasecut_point(d, oversampling=8.0, k=None, seed=0):
    """Clean PhaseCut instance, its SDP, and a random feasible point."""
    from smoothsdp import random_feasible_point

    inst = generate_clean_instance(d, oversampling, seed=seed)
    problem = build_sdp(inst)
    if k is None:
        k = default_rank(inst.n)
    y = random_feasible_point(problem, k, rng=seed + 1)
    return inst, problem, build_factor_point(problem, y)


def random_tangent(point, rng, normalize=True):
    """Random tangent direction at a point, via projection."""
    z = random_factor(*point.Y.shape, point.problem.field, rng)
    v = tangent_project(point, z)
    if normalize:
        nv = np.linalg.norm(v)
        assert nv > 0
        v = v / nv
    return v


def _to_real_vec(mat, field):
    if field is FieldTag.COMPLEX:
        return np.concatenate([mat.real.ravel(), mat.imag.ravel()])
    return np.asarray(mat, dtype=float).ravel()


def _from_real_vec(vec, n, k, field):
    if field is FieldTag.COMPLEX:
        return (vec[: n * k] + 1j * vec[n * k :]).reshape(n, k)
    return vec.reshape(n, k).copy()


def tangent_basis(point):
    """Orthonormal basis of the tangent space, the slow and obvious way.

    Projects every ambient coordinate direction, stacks the images as the
    matrix of the projector in real coordinates, and reads an orthonormal
    basis of its range off the SVD.  Checks the dimension against
    (2 if complex else 1) * n * k - rank(G).
    """
    n, k = point.Y.shape
    field = point.problem.field
    factor = 2 if field is FieldTag.COMPLEX else 1
    ambient = factor * n * k
    cols = np.empty((ambient, ambient))
    for j in range(ambient):
        e = np.zeros(ambient)
        e[j] = 1.0
        image = tangent_project(point, _from_real_vec(e, n, k, field))
        cols[:, j] = _to_real_vec(image, field)
    u, s, _ = np.linalg.svd(cols)
    # the column stack represents an orthogonal projector: spectrum {0, 1}
    dim = int(np.sum(s > 0.5))
    assert dim == ambient - point.gram_rank
    return [_from_real_vec(u[:, i], n, k, field) for i in range(dim)]


def second_order_form_matrix(point, basis):
    """Dense matrix of the quadratic form V -> <V, S V> on a tangent basis.

    Its smallest eigenvalue is the exact tangent curvature minimum that
    measure_sosp estimates (half the smallest Hessian eigenvalue).
    """
    field = point.problem.field
    b_vecs = np.stack([_to_real_vec(b, field) for b in basis], axis=1)
    sb_vecs = np.stack([_to_real_vec(point.S @ b, field) for b in basis], axis=1)
    return hermitize(b_vecs.T @ sb_vecs)


def dense_hess_lower_bound(point):
    """Exact min of <V, S V> over unit tangent V (dense oracle)."""
    basis = tangent_basis(point)
    if not basis:
        return 0.0
    return float(np.linalg.eigvalsh(second_order_form_matrix(point, basis))[0])


def fitted_slope(hs, errs, floor):
    """Asymptotic slope of log(err) vs log(h) above a noise floor.

    Reads the median of the local (consecutive-interval) slopes over the
    smallest kept h's: the leading-order regime sits just above the
    rounding floor, while the largest h's pick up the next Taylor term,
    which would bias a least-squares fit over the whole range.
    """
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    keep = errs > floor
    assert np.count_nonzero(keep) >= 4, "too few points above the noise floor"
    lh = np.log(hs[keep])
    le = np.log(errs[keep])
    local = np.diff(le) / np.diff(lh)
    return float(np.median(local[: min(3, local.size)]))


@pytest.fixture(scope="session")
def solved_small():
    """One converged noiseless PhaseCut solve shared across tests (d=4)."""
    inst = generate_clean_instance(4, 10.0, seed=7)
    problem = build_sdp(inst)
    result = solve(problem, default_rank(inst.n), SolverOptions(eps_g=1e-8, seed=3))
    assert result.converged
    return inst, problem, result
