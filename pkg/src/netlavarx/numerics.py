"""Dense linear-algebra kernels with explicit rank and tolerance contracts.

All kernels operate on float64 arrays, are pure, and are deterministic for
identical input bytes. Determinism matters downstream: model fits must be
reproducible, so eigenvector signs are pinned here rather than left to the
backend.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput

__all__ = ["economy_svd", "sym_eig_desc", "pinv"]


def _as_finite_2d(a, name):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def economy_svd(a, rank_tol=None):
    """Economy SVD keeping only singular values above the rank cutoff.

    Returns ``(u, d, v, rank)`` with ``a ~= u @ np.diag(d) @ v.T``, singular
    values descending and strictly positive, and ``u``/``v`` holding ``rank``
    orthonormal columns.

    The default cutoff is ``d[0] * max(n, m) * eps`` (the usual numerical-rank
    rule). ``rank_tol`` overrides it as a cutoff relative to ``d[0]``.
    """
    arr = _as_finite_2d(a, "a")
    n, m = arr.shape
    if n < 1 or m < 1:
        raise InvalidInput(f"economy_svd needs at least one row and column, got {arr.shape}")
    u, d, vt = np.linalg.svd(arr, full_matrices=False)
    if rank_tol is not None:
        cutoff = d[0] * rank_tol if d.size else 0.0
    else:
        cutoff = d[0] * max(n, m) * np.finfo(float).eps if d.size else 0.0
    rank = int(np.count_nonzero(d > cutoff))
    return u[:, :rank], d[:rank], vt[:rank].T, rank


def sym_eig_desc(s):
    """Eigendecomposition of a symmetric matrix with eigenvalues descending.

    The input is symmetrized as ``(S + S.T) / 2`` before decomposition; inputs
    asymmetric beyond ``1e-9 * (1 + max|S|)`` are rejected. Each eigenvector's
    sign is fixed so its largest-magnitude entry is positive (ties resolved by
    the lowest row index), which removes the backend's arbitrary sign choice.
    """
    arr = _as_finite_2d(s, "s")
    n, m = arr.shape
    if n != m:
        raise InvalidInput(f"matrix must be square, got {arr.shape}")
    scale = float(np.abs(arr).max()) if arr.size else 0.0
    asym = float(np.abs(arr - arr.T).max()) if arr.size else 0.0
    if asym > 1e-9 * (1.0 + scale):
        raise InvalidInput(f"matrix asymmetric beyond tolerance (max deviation {asym:.3e})")
    sym = 0.5 * (arr + arr.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1].copy()
    for j in range(n):
        col = eigvecs[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            eigvecs[:, j] = -col
    return eigvals, eigvecs


def pinv(a, rank_tol=None):
    """Moore-Penrose pseudo-inverse via :func:`economy_svd`.

    Uses the same rank cutoff as ``economy_svd`` so rank decisions are shared
    across the toolkit. Zero (or empty) matrices map to zero matrices of the
    transposed shape.
    """
    arr = _as_finite_2d(a, "a")
    n, m = arr.shape
    if n == 0 or m == 0:
        return np.zeros((m, n))
    u, d, v, rank = economy_svd(arr, rank_tol=rank_tol)
    if rank == 0:
        return np.zeros((m, n))
    return (v / d) @ u.T
