"""Structured linear-algebra kernels.

Matrices are plain 2-D ``numpy.ndarray`` values.  Index multisets follow the
1-based convention used when writing supports by hand, e.g. ``[1, 2, 2, 3]``;
they are converted to 0-based positions only at the point of indexing.

Vectorization is column-major (Fortran order), which is the convention under
which ``vec(B @ X @ A.T) == kron(A, B) @ vec(X)`` holds for the standard
Kronecker product.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "kron",
    "khatri_rao",
    "hadamard",
    "sum_entries",
    "vec",
    "unvec",
    "merge_indices",
    "split_indices",
    "select_columns",
    "fro_distance",
    "spectral_norm",
    "normalize_columns",
]


def _as_matrix(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def kron(A, B):
    """Kronecker product; block ``(i, j)`` of the result is ``A[i, j] * B``."""
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    m1, p1 = A.shape
    m2, p2 = B.shape
    out = A[:, None, :, None] * B[None, :, None, :]
    return out.reshape(m1 * m2, p1 * p2)


def khatri_rao(A, B):
    """Column-wise Kronecker product of ``A`` (m1 x n) and ``B`` (m2 x n).

    Column ``j`` of the result is ``kron(A[:, j], B[:, j])``.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(
            f"khatri_rao needs equal column counts, got {A.shape[1]} and {B.shape[1]}"
        )
    n = A.shape[1]
    return (A[:, None, :] * B[None, :, :]).reshape(-1, n)


def hadamard(A, B):
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"hadamard needs equal shapes, got {A.shape} and {B.shape}")
    return A * B


def sum_entries(A) -> float:
    return float(np.sum(A))


def vec(X):
    """Stack the columns of ``X`` into a single ``(rows*cols, 1)`` column."""
    X = _as_matrix(X, "X")
    return X.reshape(-1, 1, order="F")


def unvec(x, rows: int, cols: int):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != rows * cols:
        raise ValueError(f"cannot unvec {x.size} entries into {rows}x{cols}")
    return x.reshape(rows, cols, order="F")


def _check_multiset(ix, upper, name):
    ix = np.asarray(ix, dtype=np.int64).ravel()
    if ix.size and (ix.min() < 1 or ix.max() > upper):
        raise ValueError(f"{name} has entries outside [1, {upper}]: {ix.tolist()}")
    return ix


def merge_indices(ia, ib, p2: int, p1: int | None = None):
    """Map factor indices to Kronecker column indices, ``(i - 1) * p2 + i'``.

    ``ia`` indexes columns of the first factor (range ``[p1]``) and ``ib``
    columns of the second factor (range ``[p2]``).  Both are 1-based and may
    repeat entries; the merged indices are 1-based over ``[p1 * p2]``.
    """
    ia = _check_multiset(ia, p1 if p1 is not None else np.iinfo(np.int64).max, "ia")
    ib = _check_multiset(ib, p2, "ib")
    if ia.shape != ib.shape:
        raise ValueError(f"ia and ib differ in length ({ia.size} vs {ib.size})")
    return (ia - 1) * p2 + ib


def split_indices(ix, p2: int, p1: int | None = None):
    """Inverse of :func:`merge_indices`; returns ``(ia, ib)``."""
    upper = p1 * p2 if p1 is not None else np.iinfo(np.int64).max
    ix = _check_multiset(ix, upper, "indices")
    ia, ib0 = np.divmod(ix - 1, p2)
    return ia + 1, ib0 + 1


def select_columns(A, ix):
    """Columns of ``A`` at 1-based positions ``ix`` (repeats allowed)."""
    A = _as_matrix(A, "A")
    ix = _check_multiset(ix, A.shape[1], "ix")
    return A[:, ix - 1]


def fro_distance(A, B) -> float:
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"fro_distance needs equal shapes, got {A.shape} and {B.shape}")
    return float(np.linalg.norm(A - B))


def spectral_norm(A, rtol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value of ``A`` by power iteration on ``A.T @ A``.

    Diagonal matrices (including 1x1) are handled exactly.  Power iteration
    starts from a fixed vector so the result is deterministic; if it stalls
    (nearly tied top singular values) the dense SVD is used instead.
    """
    A = _as_matrix(A, "A")
    if A.size == 0:
        return 0.0
    if A.shape[0] == A.shape[1] and np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        return float(np.max(np.abs(np.diag(A))))
    if min(A.shape) == 1:
        return float(np.linalg.norm(A))

    G = A.T @ A if A.shape[0] >= A.shape[1] else A @ A.T
    v = np.ones(G.shape[0]) + np.linspace(0.0, 1.0, G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space
            break
        v = w / nw
        lam_new = float(v @ G @ v)
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return float(np.sqrt(max(lam_new, 0.0)))
        lam = lam_new
    return float(np.linalg.norm(A, 2))


def normalize_columns(A, tol: float = 0.0):
    A = _as_matrix(A, "A")
    norms = np.linalg.norm(A, axis=0)
    zero = np.flatnonzero(norms <= tol)
    if zero.size:
        raise ValueError(f"cannot normalize zero column(s) {(zero + 1).tolist()}")
    return A / norms
