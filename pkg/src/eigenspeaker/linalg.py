"""Dense symmetric linear algebra: covariance assembly, symmetric
eigendecomposition, and the symmetric-definite generalized eigenproblem.

All functions are pure and operate on plain float64 numpy arrays in C
order.  Eigenvalues are always returned in descending order and every
eigenvector column is unit-norm with its largest-magnitude component
made positive, so repeated runs produce identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ArgumentError, NumericError

MAX_DIM = 512
SYMMETRY_RTOL = 1e-8
MAX_GENERALIZED_CONDITION = 1e12


@dataclass
class EigenResult:
    """Eigenpairs sorted by descending eigenvalue.

    Attributes
    ----------
    eigenvalues : ndarray, shape (k,)
        Descending, real.
    eigenvectors : ndarray, shape (m, k)
        Column ``i`` pairs with ``eigenvalues[i]``; each column has unit
        Euclidean norm and canonical sign.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ArgumentError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return arr


def _require_symmetric(m: np.ndarray, name: str) -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise ArgumentError(f"{name} must be square, got {m.shape}")
    scale = np.linalg.norm(m)
    skew = np.linalg.norm(m - m.T)
    if skew > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ArgumentError(
            f"{name} is not symmetric: asymmetry {skew:.3e} exceeds {SYMMETRY_RTOL:g} * norm {scale:.3e}"
        )
    # Work on the exactly symmetric part; within tolerance this is a no-op.
    return 0.5 * (m + m.T)


def canonicalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so each one's largest-magnitude entry is positive.

    Eigenvectors are only defined up to sign; fixing the sign makes
    decompositions reproducible across runs and platforms.
    """
    out = vectors.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def covariance(data, mean) -> np.ndarray:
    """Unnormalized covariance ``A @ A.T`` of mean-shifted column samples.

    Parameters
    ----------
    data : ndarray, shape (m, n)
        One sample per column.
    mean : ndarray, shape (m,)
        Vector subtracted from every column before the outer product.

    Returns
    -------
    ndarray, shape (m, m)
        Symmetric positive-semidefinite. The conventional ``1/n`` factor
        is deliberately omitted: every consumer in this package either
        normalizes eigenvectors or compares like against like, so a
        constant scale cancels.
    """
    d = _as_matrix(data, "data")
    mu = np.asarray(mean, dtype=np.float64)
    if mu.ndim != 1 or mu.shape[0] != d.shape[0]:
        raise ArgumentError(
            f"mean must be a vector of length {d.shape[0]}, got shape {mu.shape}"
        )
    if not np.all(np.isfinite(mu)):
        raise ArgumentError("mean contains non-finite entries")
    shifted = d - mu[:, None]
    cov = shifted @ shifted.T
    # Enforce exact symmetry; BLAS rounding can leave ~1e-16 skew.
    return 0.5 * (cov + cov.T)


def sym_eigendecomp(m) -> EigenResult:
    """Full eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    m : ndarray, shape (k, k)
        Symmetric within ``1e-8`` relative Frobenius norm; ``k <= 512``.

    Returns
    -------
    EigenResult
        Satisfies ``m @ u_i == lam_i * u_i`` within ``1e-8 * ||m||`` and
        reconstructs ``m`` within ``1e-8`` relative Frobenius norm.

    Raises
    ------
    ArgumentError
        Non-square, non-symmetric, non-finite, or oversized input.
    NumericError
        The underlying tridiagonal eigensolver failed to converge.
    """
    arr = _as_matrix(m, "matrix")
    sym = _require_symmetric(arr, "matrix")
    if sym.shape[0] > MAX_DIM:
        raise ArgumentError(
            f"matrix dimension {sym.shape[0]} exceeds supported scale {MAX_DIM}"
        )
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigendecomposition did not converge: {exc}") from exc
    values = values[::-1].copy()
    vectors = canonicalize_signs(vectors[:, ::-1])
    return EigenResult(eigenvalues=values, eigenvectors=vectors)


def default_ridge(s_w) -> float:
    """Default regularizer for a within-class scatter matrix."""
    s = np.asarray(s_w, dtype=np.float64)
    return 1e-6 * float(np.trace(s)) / s.shape[0]


def solve_generalized_eig(s_b, s_w, ridge: float = 0.0) -> EigenResult:
    """Eigenpairs of ``inv(s_w + ridge*I) @ s_b`` for symmetric inputs.

    Parameters
    ----------
    s_b, s_w : ndarray, shape (m, m)
        Symmetric; ``s_w + ridge*I`` must be positive definite.
    ridge : float
        Non-negative Tikhonov term added to ``s_w``'s diagonal.

    Returns
    -------
    EigenResult
        Descending eigenvalues; each column ``w`` satisfies
        ``s_b @ w == lam * (s_w + ridge*I) @ w`` and is unit-norm.
        Columns are not mutually orthogonal in general (they are
        orthogonal in the ``s_w`` metric).

    Raises
    ------
    NumericError
        ``s_w + ridge*I`` has a non-positive eigenvalue or condition
        number above ``1e12``; the caller should raise ``ridge``.
    """
    b = _require_symmetric(_as_matrix(s_b, "s_b"), "s_b")
    w = _require_symmetric(_as_matrix(s_w, "s_w"), "s_w")
    if b.shape != w.shape:
        raise ArgumentError(f"s_b and s_w must share shape, got {b.shape} vs {w.shape}")
    if not np.isfinite(ridge) or ridge < 0:
        raise ArgumentError(f"ridge must be finite and >= 0, got {ridge}")

    w_r = w + ridge * np.eye(w.shape[0])
    spectrum = np.linalg.eigvalsh(w_r)
    lo, hi = float(spectrum[0]), float(spectrum[-1])
    if lo <= 0 or hi / lo > MAX_GENERALIZED_CONDITION:
        cond = np.inf if lo <= 0 else hi / lo
        raise NumericError(
            f"regularized within-class scatter is numerically singular "
            f"(condition estimate {cond:.3e} > {MAX_GENERALIZED_CONDITION:.0e}); raise ridge"
        )

    values, vectors = scipy.linalg.eigh(b, w_r)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1]
    # eigh returns s_w-metric normalization; rescale to unit Euclidean norm.
    vectors = vectors / np.linalg.norm(vectors, axis=0, keepdims=True)
    vectors = canonicalize_signs(vectors)
    return EigenResult(eigenvalues=values, eigenvectors=vectors)
