"""Dense multilinear algebra primitives.

An order-K tensor is represented as a C-contiguous ``float64`` ndarray of
shape ``(d_1, ..., d_K)``; the first index is the slowest-varying and the
last the fastest.  Matrices are plain 2-D ndarrays (row-major).  All
functions here are pure: they never mutate their inputs and are safe to
call concurrently.

Unfolding convention
--------------------
``matricize(t, k)`` (0-based mode ``k``) produces a ``d_k x prod(d_j, j!=k)``
matrix.  Columns enumerate the remaining modes in the cyclic order
``k+1, k+2, ..., K-1, 0, ..., k-1`` with the *first* mode of that list
varying fastest.  For an order-3 tensor ``A`` this means::

    matricize(A, 0)[i, j + d_1*l] == A[i, j, l]
    matricize(A, 1)[j, l + d_2*i] == A[i, j, l]
    matricize(A, 2)[l, i + d_0*j] == A[i, j, l]

For K >= 4 the same cyclic rule applies (the convention is only pinned down
explicitly for K = 3 in the matrix-series literature; the generalization is
locked by the golden tests).

``vectorize`` stacks the columns of the mode-0 unfolding, which is exactly
Fortran-order flattening: index 0 varies fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np


def as_tensor(a) -> np.ndarray:
    """Coerce input to a C-contiguous float64 ndarray."""
    return np.ascontiguousarray(a, dtype=np.float64)


def _cyclic_rest(k: int, ndim: int) -> list[int]:
    return [(k + j) % ndim for j in range(1, ndim)]


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding of ``t`` (see module docstring for the layout).

    Parameters
    ----------
    t : ndarray
        Order-K tensor.
    mode : int
        0-based mode index.

    Returns
    -------
    ndarray of shape ``(t.shape[mode], prod of the other dims)``.
    """
    t = np.asarray(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    if t.ndim == 1:
        return t.reshape(t.shape[0], 1)
    rest = _cyclic_rest(mode, t.ndim)
    # C-order flattening makes the last transposed axis fastest, so the
    # cyclic list goes in reversed.
    return np.transpose(t, [mode] + rest[::-1]).reshape(t.shape[mode], -1)


def fold(m: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`matricize`: rebuild the tensor of ``shape``."""
    shape = tuple(int(s) for s in shape)
    ndim = len(shape)
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for order-{ndim} tensor")
    if ndim == 1:
        return np.asarray(m).reshape(shape)
    rest = _cyclic_rest(mode, ndim)
    perm = [mode] + rest[::-1]
    permuted = np.asarray(m).reshape([shape[p] for p in perm])
    return np.transpose(permuted, np.argsort(perm))


def mode_multiply(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product ``t x_mode m``.

    ``m`` has shape ``(d', d_mode)``; the result replaces dimension
    ``d_mode`` by ``d'``.  Satisfies ``matricize(result, mode) ==
    m @ matricize(t, mode)``.
    """
    t = np.asarray(t)
    m = np.asarray(m)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    if m.ndim != 2 or m.shape[1] != t.shape[mode]:
        raise ValueError(
            f"matrix of shape {m.shape} cannot act on mode {mode} of tensor "
            f"with shape {t.shape}"
        )
    return np.moveaxis(np.tensordot(m, t, axes=(1, mode)), 0, mode)


def multi_mode_multiply(t: np.ndarray, ms) -> np.ndarray:
    """Apply several mode products; ``ms`` is a list of ``(matrix, mode)``.

    Modes must be distinct; the result does not depend on the order of the
    list because products along distinct modes commute.
    """
    modes = [mode for _, mode in ms]
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode in {modes}")
    out = np.asarray(t)
    for m, mode in ms:
        out = mode_multiply(out, m, mode)
    return out


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(t, dtype=np.float64)))))


def vectorize(t: np.ndarray) -> np.ndarray:
    """Flatten with index 0 fastest (columns of the mode-0 unfolding stacked)."""
    return np.asarray(t).flatten(order="F")


def unvectorize(v: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    return np.ascontiguousarray(np.reshape(v, shape, order="F"))


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the standard block structure ``a_ij * b``."""
    return np.kron(np.asarray(a), np.asarray(b))


def outer_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor (outer) product: result[i..., j...] = a[i...] * b[j...]."""
    return np.multiply.outer(np.asarray(a), np.asarray(b))


def cp_from_factors(factors) -> np.ndarray:
    """Sum of rank-1 terms built from matching columns of ``factors``.

    Every matrix in ``factors`` must have the same number of columns R; the
    result has shape ``(rows of each factor)`` and equals the sum over
    r = 1..R of the outer products of the r-th columns.
    """
    factors = [np.asarray(f) for f in factors]
    if not factors:
        raise ValueError("need at least one factor matrix")
    ncols = {f.shape[1] for f in factors}
    if len(ncols) != 1:
        raise ValueError(f"factor matrices disagree on column count: {sorted(ncols)}")
    (R,) = ncols
    out = np.zeros([f.shape[0] for f in factors])
    for r in range(R):
        out += reduce(np.multiply.outer, [f[:, r] for f in factors])
    return out


def contracted_product(a: np.ndarray, b: np.ndarray, ncontract: int) -> np.ndarray:
    """Contract the trailing ``ncontract`` modes of ``a`` with the leading
    ``ncontract`` modes of ``b``.

    Generalizes the matrix product (``ncontract=1`` on two matrices).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if not 1 <= ncontract <= min(a.ndim, b.ndim):
        raise ValueError(f"cannot contract {ncontract} modes of shapes {a.shape}, {b.shape}")
    if a.shape[a.ndim - ncontract:] != b.shape[:ncontract]:
        raise ValueError(
            f"contraction shape mismatch: trailing {a.shape[a.ndim - ncontract:]} "
            f"vs leading {b.shape[:ncontract]}"
        )
    return np.tensordot(a, b, axes=ncontract)


def series_mode_multiply(series: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Apply ``x_mode m`` to every slice of a time-major series at once.

    ``series`` has shape ``(n, d_1, ..., d_K)``; ``mode`` indexes the
    tensor modes (0-based), not the time axis.
    """
    series = np.asarray(series)
    if not 0 <= mode < series.ndim - 1:
        raise ValueError(f"mode {mode} out of range for series of order {series.ndim - 1}")
    if np.asarray(m).shape[1] != series.shape[1 + mode]:
        raise ValueError(
            f"matrix of shape {np.asarray(m).shape} cannot act on mode {mode} "
            f"of series with slice shape {series.shape[1:]}"
        )
    return np.moveaxis(np.tensordot(series, m, axes=(1 + mode, 1)), -1, 1 + mode)


@dataclass
class TuckerDecomp:
    """Core tensor plus per-mode factor matrices with orthonormal columns."""

    core: np.ndarray
    factors: list

    @property
    def ranks(self) -> tuple:
        return tuple(self.core.shape)


def tucker_core(t: np.ndarray, factors) -> np.ndarray:
    """Project ``t`` onto the factor subspaces: ``t x_k U_k^T`` for all k."""
    return multi_mode_multiply(t, [(np.asarray(u).T, k) for k, u in enumerate(factors)])


def tucker_reconstruct(decomp: TuckerDecomp) -> np.ndarray:
    return multi_mode_multiply(
        decomp.core, [(np.asarray(u), k) for k, u in enumerate(decomp.factors)]
    )
