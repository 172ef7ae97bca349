"""Matrix kernels: truncated left-singular subspaces, QR, subspace distance,
and singular-value-ratio rank selection.

Everything is deterministic given its input (LAPACK routines plus a fixed
sign convention), which the fitting code relies on for reproducible runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

# Denominator floor for singular-value ratios; keeps noiseless (exactly
# rank-deficient) spectra from dividing by zero.
RATIO_FLOOR = 1e-300


@dataclass
class SvdResult:
    """Truncated SVD: ``u @ diag(singular_values) @ v.T`` approximates the input."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray


def _column_signs(u: np.ndarray) -> np.ndarray:
    """Signs that make the largest-magnitude entry of each column positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def truncated_svd(m: np.ndarray, r: int) -> SvdResult:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not 1 <= r <= min(m.shape):
        raise ValueError(f"rank {r} out of range for shape {m.shape}")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed to converge on a {m.shape} matrix "
            f"(fro norm {np.linalg.norm(m):.3e}): {exc}"
        ) from exc
    # One sign per singular pair, applied to both sides, keeps the
    # factorization intact while making the output deterministic.
    signs = _column_signs(u[:, :r])
    return SvdResult(
        u=u[:, :r] * signs,
        singular_values=s[:r].copy(),
        v=vt[:r].T * signs,
    )


def top_left_singular_vectors(m: np.ndarray, r: int) -> np.ndarray:
    """Orthonormal basis of the top-``r`` left singular subspace of ``m``.

    For symmetric positive semidefinite input this coincides with the
    leading eigenvector subspace.  Column signs are canonicalized, so the
    output is a deterministic function of the input.
    """
    return truncated_svd(m, r).u


def singular_values(m: np.ndarray) -> np.ndarray:
    """All singular values of ``m`` in descending order."""
    m = np.asarray(m, dtype=np.float64)
    try:
        return np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge on a {m.shape} matrix: {exc}") from exc


def qr_orthonormalize(m: np.ndarray) -> np.ndarray:
    """Orthonormal basis spanning the columns of ``m`` via reduced QR.

    Raises on rank deficiency, detected through a tiny diagonal of R
    relative to the corresponding column norm.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {m.shape}")
    q, rmat = np.linalg.qr(m)
    col_norms = np.linalg.norm(m, axis=0)
    tiny = np.abs(np.diag(rmat)) < 1e-12 * np.maximum(col_norms, 1.0)
    if np.any(tiny):
        raise ValueError(
            f"rank-deficient input: columns {np.nonzero(tiny)[0].tolist()} are "
            "linearly dependent on the others"
        )
    # Make diag(R) positive so Q is unique.
    signs = np.sign(np.diag(rmat))
    return q * signs


def sin_theta_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Sine of the largest principal angle between equal-rank column spaces.

    Equals ``sqrt(1 - sigma_min(u^T v)^2)`` and also the spectral norm of
    the difference of the two orthogonal projectors.  Evaluated as the
    largest singular value of ``(I - v v^T) u``, which gives the same value
    without the catastrophic cancellation of the ``1 - sigma^2`` form when
    the subspaces nearly coincide.  Both arguments must have orthonormal
    columns (checked to 1e-8).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    for name, mat in (("first", u), ("second", v)):
        dev = np.max(np.abs(mat.T @ mat - np.eye(mat.shape[1])))
        if dev > 1e-8:
            raise ValueError(f"{name} argument is not orthonormal (deviation {dev:.2e})")
    residual = u - v @ (v.T @ u)
    return float(min(singular_values(residual)[0], 1.0))


def projector_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Spectral norm of ``u u^T - v v^T`` computed exactly via SVD."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    diff = u @ u.T - v @ v.T
    return float(singular_values(diff)[0])


def eigen_ratio_rank(values: np.ndarray, r_max: int) -> int:
    """Rank estimate maximizing the ratio of consecutive singular values.

    ``values`` must be positive and sorted descending; returns the 1-based
    index i in ``1..r_max`` maximizing ``values[i] / values[i+1]`` with
    ties broken toward the smallest i.  Denominators are floored at
    ``RATIO_FLOOR`` so an exactly rank-deficient spectrum yields its true
    rank rather than a division error.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty singular value vector")
    if not 1 <= r_max < values.size:
        raise ValueError(f"r_max {r_max} out of range for {values.size} values")
    if np.any(values < 0):
        raise ValueError("singular values must be nonnegative")
    ratios = values[:r_max] / np.maximum(values[1 : r_max + 1], RATIO_FLOOR)
    return int(np.argmax(ratios)) + 1
