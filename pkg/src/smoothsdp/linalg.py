"""Dense linear algebra helpers shared across the package.

Conventions:

* matrices and factor blocks live in R^{n x k} or C^{n x k} depending on the
  problem field; the scalar product is always the real trace inner product
  <A, B> = Re tr(A^* B), which turns C^{n x k} into a real vector space of
  dimension 2nk;
* self-adjoint matrices are stored dense and must satisfy M == M.conj().T
  entry for entry.  `hermitize` produces such a matrix from a nearly
  self-adjoint product; the construction is exact in IEEE arithmetic because
  conj((a + conj(b)) / 2) == (conj(a) + b) / 2 holds bitwise.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real trace inner product Re tr(a^* b), flattening both arguments."""
    return float(np.vdot(a, b).real)


def fro_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def hermitize(m: np.ndarray) -> np.ndarray:
    """Return (m + m^*) / 2, self-adjoint exactly as stored."""
    return (m + m.conj().T) / 2.0


def is_self_adjoint(m: np.ndarray) -> bool:
    """Entrywise-exact self-adjointness check."""
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.array_equal(m, m.conj().T)


def self_adjoint_pinv(g: np.ndarray, rank_tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudo-inverse of a self-adjoint matrix via eigh.

    Eigenvalues with absolute value <= rank_tol * max(|eigenvalues|) are
    treated as zero.  Returns the pseudo-inverse and the numerical rank.
    """
    w, v = np.linalg.eigh(g)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    keep = np.abs(w) > rank_tol * scale
    rank = int(np.count_nonzero(keep))
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    pinv = (v * inv_w) @ v.conj().T
    # the reconstruction above is self-adjoint only up to roundoff
    return hermitize(pinv), rank


def operator_norm(
    m: np.ndarray,
    seed: int = 0,
    tol: float = 1e-8,
    max_iters: int = 5000,
    dense_cutoff: int = 500,
) -> float:
    """Spectral norm of a self-adjoint matrix.

    Uses a dense eigendecomposition for n <= dense_cutoff and a seeded power
    iteration (convergence tolerance `tol` on the norm estimate) above it.
    The power iteration tracks ||m v|| which converges to max |eigenvalue|
    even when the extreme eigenvalues come in +/- pairs.
    """
    n = m.shape[0]
    if n == 0:
        return 0.0
    if n <= dense_cutoff:
        return float(np.max(np.abs(np.linalg.eigvalsh(m))))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    if np.iscomplexobj(m):
        v = v + 1j * rng.standard_normal(n)
    v = v / np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        w = m @ v
        new_est = float(np.linalg.norm(w))
        if new_est == 0.0:
            return 0.0
        v = w / new_est
        if abs(new_est - est) <= tol * max(1.0, new_est):
            return new_est
        est = new_est
    return est


def eigvalsh_tridiagonal(alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric tridiagonal matrix (diag, offdiag)."""
    if len(alphas) == 1:
        return np.asarray(alphas, dtype=float)
    return scipy.linalg.eigh_tridiagonal(alphas, betas, eigvals_only=True)


def leading_right_singular_vector(y: np.ndarray) -> np.ndarray:
    """Unit right singular vector of y for its largest singular value."""
    gram = y.conj().T @ y
    w, v = np.linalg.eigh(hermitize(gram))
    return v[:, -1]


def kth_singular_value(y: np.ndarray) -> float:
    """Smallest of the k singular values of an n x k block (0 if k > n)."""
    n, k = y.shape
    if k > n:
        return 0.0
    s = np.linalg.svd(y, compute_uv=False)
    return float(s[-1])
