"""DMDc baseline for frozen-parameter LTI systems.

Fits a reduced pair (A~, B~) through the rank-limited Procrustes problem
on stacked state/input snapshots, projects onto the output POD basis, and
recovers approximate full-order eigenvectors (dynamic modes) from the
reduced eigendecomposition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .excitation import SnapshotDataset
from .numerics import (
    TruncatedSvd,
    TruncationConfig,
    clamp_warn,
    numerical_zero_threshold,
    procrustes_solve,
    regularize_singular_values,
    truncated_svd,
)

# Free-run integration halts once the lifted state infinity-norm exceeds
# this multiple of the training-data magnitude.
INSTABILITY_FACTOR = 1e6


@dataclass
class ReducedLti:
    """Reduced discrete LTI model z[k+1] = A~ z[k] + B~ u[k], x = W z.

    ``input_svd`` and ``sigma_reg`` retain the stacked-snapshot SVD factors
    from the fit so dynamic-mode recovery does not redo the decomposition;
    they are None on models that were assembled rather than fitted.
    """

    A_tilde: np.ndarray
    B_tilde: np.ndarray
    pod_transform: np.ndarray
    ranks: TruncationConfig
    input_svd: TruncatedSvd | None = None
    sigma_reg: np.ndarray | None = None
    data_abs_max: float = 1.0
    kind: str = "dmdc"

    @property
    def order(self) -> int:
        return self.A_tilde.shape[0]

    @property
    def n_states(self) -> int:
        return self.pod_transform.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B_tilde.shape[1]

    def step(self, z: np.ndarray, u) -> np.ndarray:
        return self.A_tilde @ z + self.B_tilde @ np.atleast_1d(u)

    def one_step(self, X: np.ndarray, U: np.ndarray, P=None) -> np.ndarray:
        """Teacher-forced predictions in full coordinates.

        Each data state is projected to the reduced space, advanced one
        step, and lifted back; P is accepted for interface uniformity and
        ignored.
        """
        Z = self.pod_transform.T @ X
        Znext = self.A_tilde @ Z + self.B_tilde @ np.atleast_2d(U)
        return self.pod_transform @ Znext

    def simulate(self, x0: np.ndarray, U: np.ndarray, P=None,
                 threshold: float | None = None):
        """Free run from x0 only; returns (states, diverged_step or None)."""
        if threshold is None:
            threshold = INSTABILITY_FACTOR * self.data_abs_max
        U = np.atleast_2d(np.asarray(U, dtype=float))
        n_t = U.shape[1]
        z = self.pod_transform.T @ np.asarray(x0, dtype=float)
        states = np.empty((self.n_states, n_t + 1))
        states[:, 0] = self.pod_transform @ z
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n_t):
                z = self.A_tilde @ z + self.B_tilde @ U[:, k]
                x = self.pod_transform @ z
                if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > threshold:
                    return states[:, : k + 1], k
                states[:, k + 1] = x
        return states, None


@dataclass
class DynamicMode:
    """Eigenpair of the reduced map lifted to an approximate full eigenvector."""

    eigenvalue: complex
    reduced_eigvec: np.ndarray
    full_mode: np.ndarray


def _frozen_parameters(dataset: SnapshotDataset) -> bool:
    return dataset.P.size == 0 or bool(np.all(dataset.P == dataset.P[:, :1]))


def fit_dmdc(dataset: SnapshotDataset, cfg: TruncationConfig) -> ReducedLti:
    """Rank-limited LTI fit with POD reduction of the identified pair.

    Stacks [X; U], truncates its SVD at the Procrustes rank, builds the
    output POD basis from Y at the POD rank and assembles the reduced pair
    without ever forming the full transition matrix.
    """
    if not _frozen_parameters(dataset):
        raise ValueError("fit_dmdc requires a frozen-parameter (constant P) dataset")
    n_s, n_u = dataset.n_states, dataset.n_inputs
    r_pod = cfg.pod_rank if cfg.pod_rank is not None else min(cfg.procrustes_rank, n_s)

    omega = np.vstack([dataset.X, dataset.U])
    fac = truncated_svd(omega, cfg.procrustes_rank)
    clamp_warn(cfg.procrustes_rank, fac.rank, "dmdc stacked-snapshot SVD")
    sigma_reg = regularize_singular_values(
        fac.singular_values,
        cfg.regularization,
        zero_tol=numerical_zero_threshold(omega.shape, fac.singular_values[0]),
    )

    pod = truncated_svd(dataset.Y, r_pod)
    clamp_warn(r_pod, pod.rank, "dmdc output POD")
    W_yr = pod.left_vectors

    # G = Y V_r diag(sigma_reg) is shared by the A and B blocks
    G = (dataset.Y @ fac.right_vectors) * sigma_reg
    W_r1 = fac.left_vectors[:n_s]
    W_r2 = fac.left_vectors[n_s:]
    A_tilde = W_yr.T @ G @ (W_r1.T @ W_yr)
    B_tilde = W_yr.T @ G @ W_r2.T
    return ReducedLti(
        A_tilde=A_tilde,
        B_tilde=B_tilde,
        pod_transform=W_yr,
        ranks=TruncationConfig(fac.rank, pod.rank, cfg.regularization),
        input_svd=fac,
        sigma_reg=sigma_reg,
        data_abs_max=dataset.abs_max(),
    )


def recover_modes(dataset: SnapshotDataset, model: ReducedLti,
                  k: int | None = None) -> list[DynamicMode]:
    """Dominant eigenpairs of A~ lifted to approximate full-order eigenvectors.

    The lift applies the implicitly identified full transition matrix to the
    lifted reduced eigenvector and rescales by the eigenvalue; only the
    state block of the stacked SVD participates. Zero eigenvalues carry no
    full-mode information and are excluded with a notice.
    """
    if model.input_svd is None or model.sigma_reg is None:
        raise ValueError("model lacks retained SVD factors; refit with fit_dmdc")
    eigvals, eigvecs = np.linalg.eig(model.A_tilde)
    order = np.argsort(-np.abs(eigvals))
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    n_s = model.n_states
    W_r1 = model.input_svd.left_vectors[:n_s]
    modes: list[DynamicMode] = []
    wanted = len(eigvals) if k is None else min(k, len(eigvals))
    zero_tol = np.max(np.abs(eigvals)) * 1e-12 if eigvals.size else 0.0
    for lam, omega in zip(eigvals[:wanted], eigvecs[:, :wanted].T):
        if abs(lam) <= zero_tol:
            warnings.warn(
                "zero eigenvalue excluded from dynamic-mode recovery",
                UserWarning, stacklevel=2,
            )
            continue
        lifted = model.pod_transform @ omega
        coeffs = model.sigma_reg * (W_r1.T @ lifted)
        phi = dataset.Y @ (model.input_svd.right_vectors @ coeffs) / lam
        modes.append(DynamicMode(eigenvalue=lam, reduced_eigvec=omega, full_mode=phi))
    return modes


def predict(model: ReducedLti, u_traj: np.ndarray, x0: np.ndarray | None = None,
            z0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Iterate the reduced map; returns (reduced, lifted) trajectories.

    Exactly one of ``x0`` (full state, projected on entry) or ``z0``
    (reduced state) must be given. Both returned arrays include the initial
    column.
    """
    if (x0 is None) == (z0 is None):
        raise ValueError("give exactly one of x0 or z0")
    z = model.pod_transform.T @ np.asarray(x0, float) if z0 is None \
        else np.asarray(z0, dtype=float)
    U = np.atleast_2d(np.asarray(u_traj, dtype=float))
    n_t = U.shape[1]
    Z = np.empty((model.order, n_t + 1))
    Z[:, 0] = z
    for k in range(n_t):
        z = model.A_tilde @ z + model.B_tilde @ U[:, k]
        Z[:, k + 1] = z
    return Z, model.pod_transform @ Z
