"""Local identification: one LTI per frozen parameter value, then a
rank-limited regression of the reduced scheduling weights.

Two variants share the pipeline. The full-space variant identifies each
LTI in the original coordinates and projects the matrices afterwards; the
latent variant projects the data first and never forms a full-space
matrix, so every regression runs at the reduced dimension.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .excitation import LocalDatasetBundle, SnapshotDataset
from .features import SchedulingBasis, eval_basis
from .global_lpv import FullLpvModel, ReducedLpvModel
from .numerics import (
    TruncationConfig,
    clamp_warn,
    numerical_zero_threshold,
    procrustes_solve,
    regularize_singular_values,
    truncated_svd,
)


@dataclass
class LtiCollection:
    """Per-parameter LTI pairs plus the shared POD transform.

    ``space`` records whether the stored matrices live in the original
    ("full") or the POD-projected ("latent") coordinates.
    """

    thetas: list[np.ndarray]
    A_list: list[np.ndarray]
    B_list: list[np.ndarray]
    space: str
    pod_transform: np.ndarray

    def __len__(self):
        return len(self.thetas)


def pod_from_bundle(bundle: LocalDatasetBundle, r: int) -> np.ndarray:
    """POD transform from the horizontally concatenated output snapshots.

    The full factorization is computed once per bundle and cached on it, so
    rank sweeps only pay for the decomposition once.
    """
    if len(bundle) == 0:
        raise ValueError("bundle must contain at least one dataset")
    cached = getattr(bundle, "_pod_factors", None)
    if cached is None:
        Y_tot = np.hstack([ds.Y for ds in bundle.datasets])
        cached = truncated_svd(Y_tot, min(Y_tot.shape))
        bundle._pod_factors = cached
    r_eff = min(r, cached.rank)
    clamp_warn(r, r_eff, "bundle output POD")
    return cached.left_vectors[:, :r_eff]


def _fit_lti(X: np.ndarray, U: np.ndarray, Y: np.ndarray,
             lam: float) -> tuple[np.ndarray, np.ndarray, int]:
    """Full least squares [A B] = Y [X; U]^+; also reports the regressor rank."""
    F = np.vstack([X, U])
    fac = truncated_svd(F, min(F.shape))
    s_reg = regularize_singular_values(
        fac.singular_values, lam,
        zero_tol=numerical_zero_threshold(F.shape, fac.singular_values[0]),
    )
    G = (Y @ fac.right_vectors) * s_reg @ fac.left_vectors.T
    n = X.shape[0]
    return G[:, :n], G[:, n:], fac.rank


def _warn_deficient(deficient: list, needed: int) -> None:
    if deficient:
        listed = ", ".join(f"theta={np.array2string(th)} (rank {rk})"
                           for th, rk in deficient)
        warnings.warn(
            f"frozen-system regressors are rank deficient (need {needed}): {listed}; "
            "minimum-norm least squares used",
            UserWarning, stacklevel=3,
        )


def _regress_weights(thetas, A_list, B_list, basis_x: SchedulingBasis,
                     basis_u: SchedulingBasis, lam: float):
    """Stacked least-squares regression of the scheduling weights.

    The matrix-valued samples are stacked horizontally: the A equation
    regresses [A~(1) ... A~(n)] on [phi(theta_1) kron I ... ], which is
    algebraically the vectorized least squares without the sparse blowup.

    The solve runs at full effective rank. Because the regressor is a
    Kronecker product with the identity, each of its distinct singular
    values appears with multiplicity equal to the state dimension; any
    truncation below that multiplicity would discard whole scheduling
    directions and destroy the parameter dependence, so no rank limit is
    meaningful here.
    """
    dim = A_list[0].shape[0]
    n_u = B_list[0].shape[1]
    eye_s = np.eye(dim)
    eye_u = np.eye(n_u)
    F_A = np.hstack([np.kron(eval_basis(basis_x, th)[:, None], eye_s)
                     for th in thetas])
    F_B = np.hstack([np.kron(eval_basis(basis_u, th)[:, None], eye_u)
                     for th in thetas])
    Y_A = np.hstack(A_list)
    Y_B = np.hstack(B_list)
    W_A_t = procrustes_solve(Y_A, F_A, min(F_A.shape), lam)
    W_B_t = procrustes_solve(Y_B, F_B, min(F_B.shape), lam)
    return W_A_t, W_B_t


def _bundle_abs_max(bundle: LocalDatasetBundle) -> float:
    return max(ds.abs_max() for ds in bundle.datasets)


def identify_lti_collection(bundle: LocalDatasetBundle,
                            lam: float = 0.0) -> LtiCollection:
    """Full-space least-squares LTI pair per frozen parameter value.

    The result can be passed to :func:`fit_local_fullspace` or
    :func:`fit_local_full_order` to share the per-parameter fits across a
    rank sweep.
    """
    n_s = bundle.datasets[0].n_states
    thetas, A_full, B_full, deficient = [], [], [], []
    needed = n_s + bundle.datasets[0].n_inputs
    for theta, ds in bundle:
        A, B, rank = _fit_lti(ds.X, ds.U, ds.Y, lam)
        if rank < min(needed, ds.n_samples):
            deficient.append((theta, rank))
        thetas.append(theta)
        A_full.append(A)
        B_full.append(B)
    _warn_deficient(deficient, needed)
    return LtiCollection(thetas, A_full, B_full, "full", np.eye(n_s))


def fit_local_fullspace(bundle: LocalDatasetBundle, basis_x: SchedulingBasis,
                        basis_u: SchedulingBasis | None, r: int,
                        lam: float = 0.0,
                        lti_collection: LtiCollection | None = None,
                        ) -> tuple[LtiCollection, ReducedLpvModel]:
    """Identify each frozen LTI in full coordinates, project, regress weights."""
    if basis_u is None:
        basis_u = basis_x
    W_yr = pod_from_bundle(bundle, r)
    if lti_collection is None:
        lti_collection = identify_lti_collection(bundle, lam)
    elif lti_collection.space != "full":
        raise ValueError("precomputed collection must hold full-space matrices")
    thetas, A_full, B_full = (lti_collection.thetas, lti_collection.A_list,
                              lti_collection.B_list)
    collection = LtiCollection(thetas, A_full, B_full, "full", W_yr)

    A_lat = [W_yr.T @ A @ W_yr for A in A_full]
    B_lat = [W_yr.T @ B for B in B_full]
    W_A_t, W_B_t = _regress_weights(thetas, A_lat, B_lat, basis_x, basis_u, lam)
    model = ReducedLpvModel(
        W_A_tilde=W_A_t, W_B_tilde=W_B_t, pod_transform=W_yr,
        basis_x=basis_x, basis_u=basis_u,
        cfg=TruncationConfig(W_yr.shape[1], W_yr.shape[1], lam),
        data_abs_max=_bundle_abs_max(bundle), kind="local-full",
    )
    return collection, model


def fit_local_latent(bundle: LocalDatasetBundle, basis_x: SchedulingBasis,
                     basis_u: SchedulingBasis | None, r: int,
                     lam: float = 0.0) -> tuple[LtiCollection, ReducedLpvModel]:
    """Identify each frozen LTI directly in the shared POD latent space."""
    if basis_u is None:
        basis_u = basis_x
    W_yr = pod_from_bundle(bundle, r)
    thetas, A_lat, B_lat, deficient = [], [], [], []
    needed = W_yr.shape[1] + bundle.datasets[0].n_inputs
    for theta, ds in bundle:
        A, B, rank = _fit_lti(W_yr.T @ ds.X, ds.U, W_yr.T @ ds.Y, lam)
        if rank < min(needed, ds.n_samples):
            deficient.append((theta, rank))
        thetas.append(theta)
        A_lat.append(A)
        B_lat.append(B)
    _warn_deficient(deficient, needed)
    collection = LtiCollection(thetas, A_lat, B_lat, "latent", W_yr)

    W_A_t, W_B_t = _regress_weights(thetas, A_lat, B_lat, basis_x, basis_u, lam)
    model = ReducedLpvModel(
        W_A_tilde=W_A_t, W_B_tilde=W_B_t, pod_transform=W_yr,
        basis_x=basis_x, basis_u=basis_u,
        cfg=TruncationConfig(W_yr.shape[1], W_yr.shape[1], lam),
        data_abs_max=_bundle_abs_max(bundle), kind="local-latent",
    )
    return collection, model


def fit_local_full_order(bundle: LocalDatasetBundle, basis_x: SchedulingBasis,
                         basis_u: SchedulingBasis | None = None,
                         lam: float = 0.0,
                         lti_collection: LtiCollection | None = None,
                         ) -> tuple[LtiCollection, FullLpvModel]:
    """Local identification without any reduction: full-space scheduling weights.

    Regresses the full-space weight blocks over the per-parameter LTI
    matrices at full rank; the reference point the reduced variants are
    measured against.
    """
    if basis_u is None:
        basis_u = basis_x
    if lti_collection is None:
        lti_collection = identify_lti_collection(bundle, lam)
    elif lti_collection.space != "full":
        raise ValueError("precomputed collection must hold full-space matrices")
    collection = lti_collection
    thetas, A_full, B_full = (collection.thetas, collection.A_list,
                              collection.B_list)

    W_A, W_B = _regress_weights(thetas, A_full, B_full, basis_x, basis_u, lam)
    model = FullLpvModel(
        W_A=W_A, W_B=W_B, basis_x=basis_x, basis_u=basis_u,
        regularization=lam, rank=None,
        data_abs_max=_bundle_abs_max(bundle), kind="full-ls",
    )
    return collection, model


def frozen_dataset(dataset: SnapshotDataset) -> bool:
    """True when every parameter column of the dataset is identical."""
    return dataset.P.size == 0 or bool(np.all(dataset.P == dataset.P[:, :1]))
