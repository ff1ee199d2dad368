"""Dense linear-algebra kernels shared by all identification code.

Truncated SVD, regularized singular-value inversion, Kronecker products
and the rank-limited Procrustes solver. Everything here is a pure
function on immutable inputs and safe to call from multiple threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Absolute floor below which a singular value counts as numerically zero
# when no parent-matrix context is available (bare-vector calls). Callers
# holding an SVD should pass ``numerical_zero_threshold`` instead.
BARE_ZERO_TOL = 1e-10


class RankClampWarning(UserWarning):
    """A requested truncation rank exceeded the effective rank of the data."""


@dataclass(frozen=True)
class TruncatedSvd:
    """Top-r singular triplets of a matrix.

    ``left_vectors`` is n x r with orthonormal columns, ``singular_values``
    is length r, descending and nonnegative, ``right_vectors`` is N x r
    with orthonormal columns. ``rank`` is the effective rank actually
    returned, which may be smaller than requested (see
    :func:`truncated_svd`).
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    rank: int


@dataclass(frozen=True)
class TruncationConfig:
    """Rank and regularization settings for a single fit.

    ``pod_rank`` may be None, meaning "no state-space reduction" (full-space
    weights) or "pick a default" depending on the consuming fit routine.
    """

    procrustes_rank: int
    pod_rank: int | None = None
    regularization: float = 0.0

    def __post_init__(self):
        if self.procrustes_rank < 1:
            raise ValueError(f"procrustes_rank must be >= 1, got {self.procrustes_rank}")
        if self.pod_rank is not None:
            if self.pod_rank < 1:
                raise ValueError(f"pod_rank must be >= 1, got {self.pod_rank}")
            if self.procrustes_rank < self.pod_rank:
                raise ValueError(
                    f"procrustes_rank ({self.procrustes_rank}) must be >= "
                    f"pod_rank ({self.pod_rank})"
                )
        if self.regularization < 0:
            raise ValueError(f"regularization must be >= 0, got {self.regularization}")


def numerical_zero_threshold(shape: tuple[int, int], smax: float) -> float:
    """Backward-stable cutoff under which singular values count as zero."""
    return max(shape) * smax * 2.0 ** -52


def truncated_svd(M: np.ndarray, r: int) -> TruncatedSvd:
    """Top-``r`` singular triplets of ``M``.

    If ``r`` exceeds the number of singular values above the numerical-zero
    threshold, the result is clamped to that count; the clamp is silent and
    the effective rank is recorded in the result.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {M.shape}")
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")

    W, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] > 0:
        effective = int(np.count_nonzero(s > numerical_zero_threshold(M.shape, s[0])))
    else:
        effective = 0
    effective = max(effective, 1)  # keep at least one triplet so shapes stay valid
    r_eff = min(r, effective, len(s))
    return TruncatedSvd(
        left_vectors=W[:, :r_eff],
        singular_values=s[:r_eff],
        right_vectors=Vt[:r_eff].T,
        rank=r_eff,
    )


def regularize_singular_values(
    s: np.ndarray, lam: float, zero_tol: float | None = None
) -> np.ndarray:
    """Elementwise regularized inverse sigma / (sigma^2 + lambda^2).

    With ``lam == 0`` this is the plain reciprocal, except that entries at
    or below ``zero_tol`` map to 0 instead of overflowing. ``zero_tol``
    defaults to the absolute floor ``BARE_ZERO_TOL``; callers that hold the
    originating matrix should pass :func:`numerical_zero_threshold`.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("singular values must be nonnegative")
    if lam < 0:
        raise ValueError(f"regularization must be >= 0, got {lam}")
    if zero_tol is None:
        zero_tol = BARE_ZERO_TOL

    if lam == 0.0:
        out = np.zeros_like(s)
        keep = s > zero_tol
        out[keep] = 1.0 / s[keep]
        return out
    return s / (s ** 2 + lam ** 2)


def kron_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two vectors: block i of the result is a[i] * b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise ValueError("kron_vec expects two nonempty 1-D vectors")
    return np.kron(a, b)


def procrustes_solve(Y: np.ndarray, F: np.ndarray, r: int, lam: float) -> np.ndarray:
    """Rank-limited least squares min ||Y - G F|| via truncated SVD of F.

    Returns G = Y V_r diag(reg(s_r)) W_r^T where (W_r, s_r, V_r) is the
    rank-``r`` truncated SVD of F. With full rank and ``lam == 0`` this is
    the minimum-norm least-squares solution.
    """
    Y = np.asarray(Y, dtype=float)
    F = np.asarray(F, dtype=float)
    if Y.ndim != 2 or F.ndim != 2:
        raise ValueError("Y and F must be 2-D matrices")
    if Y.shape[1] != F.shape[1]:
        raise ValueError(
            f"column-count mismatch: Y has {Y.shape[1]} columns, F has {F.shape[1]}"
        )

    fac = truncated_svd(F, r)
    s_reg = regularize_singular_values(
        fac.singular_values,
        lam,
        zero_tol=numerical_zero_threshold(F.shape, fac.singular_values[0]),
    )
    return (Y @ fac.right_vectors) * s_reg @ fac.left_vectors.T


def clamp_warn(requested: int, effective: int, what: str) -> None:
    """Emit a RankClampWarning when a fit had to reduce a requested rank."""
    if effective < requested:
        warnings.warn(
            f"{what}: requested rank {requested} exceeds effective rank; "
            f"clamped to {effective}",
            RankClampWarning,
            stacklevel=3,
        )
