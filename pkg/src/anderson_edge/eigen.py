"""Dense Hermitian eigensolver.

Householder reduction to a real symmetric tridiagonal matrix, then either
implicit-shift QL with accumulated rotations (full spectrum) or Sturm
bisection plus inverse iteration (the ``k`` smallest pairs).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConvergenceFailure, NonFiniteEntry

MAX_QL_ITER = 60
CLUSTER_RTOL = 1e-9
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray | None

    @property
    def order(self) -> int:
        return self.values.shape[0] if self.vectors is None else self.vectors.shape[0]


def _prepare(matrix) -> np.ndarray:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteEntry("matrix contains NaN or infinite entries")
    m = m.astype(np.complex128)
    return np.ascontiguousarray(0.5 * (m + m.conj().T))


def tridiagonalize(matrix):
    """Return ``(d, e, q)`` with ``q^H M q`` tridiagonal, real, diagonal ``d``."""
    a = _prepare(matrix)
    return _kernels.householder_tridiagonal(a)


def _tridiagonal_ql(d, e, want_vectors: bool):
    n = d.shape[0]
    d = d.copy()
    e = e.copy()
    z = np.eye(n) if want_vectors else np.empty((0, 0))
    status, residual = _kernels.tql_implicit(d, e, z, want_vectors, MAX_QL_ITER)
    if status != 0:
        raise ConvergenceFailure(f"QL iteration did not converge in {MAX_QL_ITER} sweeps", residual)
    order = np.argsort(d, kind="stable")
    d = d[order]
    if want_vectors:
        z = np.ascontiguousarray(z[:, order])
    return d, z


def eig_hermitian(matrix, vectors: bool = True) -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix.

    The input is symmetrised as ``(M + M^H) / 2``. Eigenvalues come back
    sorted in nondecreasing order; eigenvectors are the matching columns.
    Within a numerically degenerate cluster any orthonormal basis may be
    returned.
    """
    d, e, q = _kernels.householder_tridiagonal(_prepare(matrix), vectors)
    n = d.shape[0]
    if n == 0:
        return EigenDecomposition(np.empty(0), np.empty((0, 0), complex) if vectors else None)
    values, z = _tridiagonal_ql(d, e, vectors)
    if not vectors:
        return EigenDecomposition(values, None)
    vecs = _kernels.back_transform(q, z)
    return EigenDecomposition(values, _reorthonormalize_clusters(values, vecs, _frob(d, e)))


def eigvalsh(matrix) -> np.ndarray:
    return eig_hermitian(matrix, vectors=False).values


def eig_smallest_k(matrix, k: int, vectors: bool = True) -> EigenDecomposition:
    """The ``k`` smallest eigenpairs, by bisection and inverse iteration.

    Falls back to the full QL decomposition when inverse iteration leaves a
    residual above the solver tolerance (tight clusters).
    """
    a = _prepare(matrix)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    d, e, q = _kernels.householder_tridiagonal(a.copy(), vectors)
    values = _kernels.bisect_smallest(d, e, k)
    if not vectors:
        return EigenDecomposition(values, None)
    scale = _frob(d, e)
    gap = CLUSTER_RTOL * max(scale, 1.0)
    y = _kernels.inverse_iteration(d, e, values, gap, 3)
    vecs = _kernels.back_transform(q, y)
    vecs = _reorthonormalize_clusters(values, vecs, scale)
    resid = np.linalg.norm(a @ vecs - vecs * values[None, :], axis=0)
    if resid.size and resid.max() > RESIDUAL_RTOL * max(scale, 1e-300):
        full = eig_hermitian(a)
        return EigenDecomposition(full.values[:k].copy(), full.vectors[:, :k].copy())
    return EigenDecomposition(values, vecs)


def _frob(d, e) -> float:
    return float(np.sqrt(np.sum(d * d) + 2.0 * np.sum(e[:-1] * e[:-1]))) if d.size else 0.0


def _reorthonormalize_clusters(values, vecs, scale) -> np.ndarray:
    """Modified Gram-Schmidt (two passes) inside each degenerate cluster."""
    gap = CLUSTER_RTOL * max(scale, 1.0)
    out = vecs.copy()
    start = 0
    n = values.shape[0]
    for j in range(1, n + 1):
        if j == n or values[j] - values[j - 1] > gap:
            if j - start > 1:
                block = out[:, start:j]
                for _ in range(2):
                    for c in range(block.shape[1]):
                        for p in range(c):
                            block[:, c] -= np.vdot(block[:, p], block[:, c]) * block[:, p]
                        block[:, c] /= np.linalg.norm(block[:, c])
                out[:, start:j] = block
            start = j
    return out
