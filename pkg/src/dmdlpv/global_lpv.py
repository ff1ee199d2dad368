"""Global identification of reduced LPV models from Kronecker features.

The one-shot entry points are :func:`fit_global` (reduced weights through
rank-limited regression plus POD projection) and
:func:`fit_full_least_squares` (the full-space baseline). Rank sweeps reuse
:class:`GlobalLpvFitter`, which factors the stacked feature matrix once and
derives every (rank, regularization) combination from it.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .dmdc import INSTABILITY_FACTOR, ReducedLti
from .excitation import SnapshotDataset
from .features import SchedulingBasis, eval_basis, eval_basis_trajectory, kron_columns
from .numerics import TruncationConfig, clamp_warn, regularize_singular_values

# Feature matrices larger than this many bytes are never materialized whole;
# the fit switches to accumulating Gram/cross products over column chunks.
GRAM_BYTE_LIMIT = 1_500_000_000
_CHUNK_COLS = 8192


@dataclass
class FullLpvModel:
    """Full-space LPV weights x[k+1] = W_A (phi kron x) + W_B (psi kron u).

    Weight blocks follow the basis order: W_A = (A_0 A_1 ... ), one
    n_s-column block per basis function.
    """

    W_A: np.ndarray
    W_B: np.ndarray
    basis_x: SchedulingBasis
    basis_u: SchedulingBasis
    regularization: float = 0.0
    rank: int | None = None
    data_abs_max: float = 1.0
    kind: str = "full-ls"

    @property
    def n_states(self) -> int:
        return self.W_A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.W_B.shape[1] // self.basis_u.count

    def a_block(self, i: int) -> np.ndarray:
        n = self.n_states
        return self.W_A[:, i * n:(i + 1) * n]

    def b_block(self, i: int) -> np.ndarray:
        m = self.n_inputs
        return self.W_B[:, i * m:(i + 1) * m]

    def matrices_at(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Frozen-parameter pair (A(theta), B(theta))."""
        phi = eval_basis(self.basis_x, theta)
        psi = eval_basis(self.basis_u, theta)
        A = sum(phi[i] * self.a_block(i) for i in range(self.basis_x.count))
        B = sum(psi[i] * self.b_block(i) for i in range(self.basis_u.count))
        return A, B

    def one_step(self, X: np.ndarray, U: np.ndarray, P: np.ndarray) -> np.ndarray:
        out = np.empty((self.n_states, X.shape[1]))
        for sl, XP, UP in _feature_chunks(X, U, P, self.basis_x, self.basis_u):
            out[:, sl] = self.W_A @ XP + self.W_B @ UP
        return out

    def simulate(self, x0, U, P, threshold: float | None = None):
        return _free_run(self, x0, U, P, threshold, reduced=False)


@dataclass
class ReducedLpvModel:
    """POD-reduced LPV weights z[k+1] = W~_A (phi kron z) + W~_B (psi kron u)."""

    W_A_tilde: np.ndarray
    W_B_tilde: np.ndarray
    pod_transform: np.ndarray
    basis_x: SchedulingBasis
    basis_u: SchedulingBasis
    cfg: TruncationConfig
    data_abs_max: float = 1.0
    kind: str = "global"

    @property
    def order(self) -> int:
        return self.W_A_tilde.shape[0]

    @property
    def n_states(self) -> int:
        return self.pod_transform.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.W_B_tilde.shape[1] // self.basis_u.count

    def a_block(self, i: int) -> np.ndarray:
        r = self.order
        return self.W_A_tilde[:, i * r:(i + 1) * r]

    def b_block(self, i: int) -> np.ndarray:
        m = self.n_inputs
        return self.W_B_tilde[:, i * m:(i + 1) * m]

    def freeze(self, theta) -> ReducedLti:
        """Reduced LTI pair at a frozen parameter value."""
        phi = eval_basis(self.basis_x, theta)
        psi = eval_basis(self.basis_u, theta)
        A = sum(phi[i] * self.a_block(i) for i in range(self.basis_x.count))
        B = sum(psi[i] * self.b_block(i) for i in range(self.basis_u.count))
        return ReducedLti(
            A_tilde=A, B_tilde=B, pod_transform=self.pod_transform,
            ranks=self.cfg, data_abs_max=self.data_abs_max, kind="frozen-lpv",
        )

    def one_step(self, X: np.ndarray, U: np.ndarray, P: np.ndarray) -> np.ndarray:
        """Teacher-forced predictions: project, advance, lift (full coordinates)."""
        Z = self.pod_transform.T @ X
        out = np.empty((self.n_states, X.shape[1]))
        for sl, ZP, UP in _feature_chunks(Z, U, P, self.basis_x, self.basis_u):
            out[:, sl] = self.pod_transform @ (self.W_A_tilde @ ZP + self.W_B_tilde @ UP)
        return out

    def simulate(self, x0, U, P, threshold: float | None = None):
        return _free_run(self, x0, U, P, threshold, reduced=True)


def _feature_chunks(S, U, P, basis_x, basis_u):
    """Yield (slice, S_P, U_P) feature blocks over manageable column chunks."""
    U = np.atleast_2d(U)
    P = np.atleast_2d(P)
    n = S.shape[1]
    for start in range(0, n, _CHUNK_COLS):
        sl = slice(start, min(start + _CHUNK_COLS, n))
        Px = eval_basis_trajectory(basis_x, P[:, sl])
        Pu = Px if basis_u is basis_x else eval_basis_trajectory(basis_u, P[:, sl])
        yield sl, kron_columns(Px, S[:, sl]), kron_columns(Pu, U[:, sl])


def _free_run(model, x0, U, P, threshold, reduced: bool):
    """Shared free-run loop; returns (full-space states, diverged_step or None)."""
    if threshold is None:
        threshold = INSTABILITY_FACTOR * model.data_abs_max
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n_t = U.shape[1]
    x0 = np.asarray(x0, dtype=float)

    Phi = eval_basis_trajectory(model.basis_x, P)
    Psi = Phi if model.basis_u is model.basis_x \
        else eval_basis_trajectory(model.basis_u, P)

    if reduced:
        lift = model.pod_transform.__matmul__
        s = model.pod_transform.T @ x0
        WA, WB = model.W_A_tilde, model.W_B_tilde
    else:
        lift = lambda v: v
        s = x0
        WA, WB = model.W_A, model.W_B

    states = np.empty((model.n_states, n_t + 1))
    states[:, 0] = lift(s)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_t):
            s = WA @ np.kron(Phi[:, k], s) + WB @ np.kron(Psi[:, k], U[:, k])
            x = lift(s)
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > threshold:
                return states[:, : k + 1], k
            states[:, k + 1] = x
    return states, None


class GlobalLpvFitter:
    """Shared factorization of the stacked feature matrix for repeated fits.

    The stacked [X_P; U_P] matrix is decomposed once; every rank /
    regularization combination afterwards is a cheap slice. Two backends:

    - "direct": dense SVD of the materialized feature stack (backward
      stable; required for the near-machine-precision regime of
      unregularized fits).
    - "gram": accumulates F F^T and Y F^T over column chunks and
      eigendecomposes the Gram matrix. Memory stays O(n_features^2)
      regardless of sample count, at the cost of squaring the condition
      number, so singular values below smax * sqrt(dim * eps) are treated
      as zero. Appropriate for large regularized problems.

    "auto" picks "gram" only when the materialized stack would exceed
    GRAM_BYTE_LIMIT.
    """

    def __init__(self, dataset: SnapshotDataset, basis_x: SchedulingBasis,
                 basis_u: SchedulingBasis | None = None, method: str = "auto"):
        if basis_u is None:
            basis_u = basis_x
        if basis_x.n_params != dataset.n_params:
            raise ValueError("basis parameter count does not match dataset")
        self.dataset = dataset
        self.basis_x = basis_x
        self.basis_u = basis_u
        self.n_rows = basis_x.count * dataset.n_states + basis_u.count * dataset.n_inputs
        feature_bytes = self.n_rows * dataset.n_samples * 8
        if method == "auto":
            method = "gram" if feature_bytes > GRAM_BYTE_LIMIT else "direct"
        if method not in ("direct", "gram"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self._factors = None
        self._pod = None

    # -- factorizations -----------------------------------------------------

    def _factorize(self):
        """(W, s, YV, inversion zero-tol) for the stacked feature matrix."""
        if self._factors is not None:
            return self._factors
        ds = self.dataset
        if self.method == "direct":
            F = self._materialize()
            W, s, Vt = np.linalg.svd(F, full_matrices=False)
            YV = ds.Y @ Vt.T
            zero_tol = max(F.shape) * s[0] * 2.0 ** -52
        else:
            C = np.zeros((self.n_rows, self.n_rows))
            Z = np.zeros((ds.n_states, self.n_rows))
            for sl, XP, UP in _feature_chunks(ds.X, ds.U, ds.P,
                                              self.basis_x, self.basis_u):
                Fc = np.vstack([XP, UP])
                C += Fc @ Fc.T
                Z += ds.Y[:, sl] @ Fc.T
            evals, W = np.linalg.eigh(C)
            evals, W = evals[::-1], W[:, ::-1]
            s = np.sqrt(np.clip(evals, 0.0, None))
            # Gram squaring halves the usable precision of the spectrum
            zero_tol = s[0] * np.sqrt(self.n_rows * 2.0 ** -52)
            inv = np.where(s > zero_tol, 1.0 / np.where(s > 0, s, 1.0), 0.0)
            YV = (Z @ W) * inv
        self._factors = (W, s, YV, zero_tol)
        return self._factors

    def _materialize(self) -> np.ndarray:
        ds = self.dataset
        F = np.empty((self.n_rows, ds.n_samples))
        for sl, XP, UP in _feature_chunks(ds.X, ds.U, ds.P, self.basis_x, self.basis_u):
            F[: XP.shape[0], sl] = XP
            F[XP.shape[0]:, sl] = UP
        return F

    def _pod_factors(self):
        if self._pod is None:
            Wy, sy, _ = np.linalg.svd(self.dataset.Y, full_matrices=False)
            self._pod = (Wy, sy)
        return self._pod

    def effective_rank(self) -> int:
        W, s, YV, zero_tol = self._factorize()
        return int(np.count_nonzero(s > zero_tol))

    # -- fits ---------------------------------------------------------------

    def _fullspace_weights(self, rank: int | None, lam: float):
        """Rank-limited full-space solution split into (G_A, G_B, r_eff)."""
        W, s, YV, zero_tol = self._factorize()
        max_rank = self.effective_rank()
        if rank is None:
            r = max_rank
        else:
            if rank < 1:
                raise ValueError(f"rank must be >= 1, got {rank}")
            r = min(rank, max_rank)
            clamp_warn(rank, r, "global stacked-feature factorization")
        s_reg = regularize_singular_values(s[:r], lam, zero_tol=zero_tol)
        G = (YV[:, :r] * s_reg) @ W[:, :r].T
        split = self.basis_x.count * self.dataset.n_states
        return G[:, :split], G[:, split:], r

    def fit_fullspace(self, rank: int | None = None, lam: float = 0.0) -> FullLpvModel:
        """Full-space weights; ``rank=None`` gives the least-squares solution."""
        G_A, G_B, r_eff = self._fullspace_weights(rank, lam)
        return FullLpvModel(
            W_A=G_A, W_B=G_B, basis_x=self.basis_x, basis_u=self.basis_u,
            regularization=lam, rank=r_eff if rank is not None else None,
            data_abs_max=self.dataset.abs_max(),
        )

    def fit(self, cfg: TruncationConfig) -> ReducedLpvModel:
        """Reduced weights: rank-limited solve projected on the output POD basis."""
        ds = self.dataset
        r_pod = cfg.pod_rank if cfg.pod_rank is not None \
            else min(cfg.procrustes_rank, ds.n_states)
        G_A, G_B, r_pr_eff = self._fullspace_weights(
            cfg.procrustes_rank, cfg.regularization)

        Wy, sy = self._pod_factors()
        sy_tol = max(ds.Y.shape) * sy[0] * 2.0 ** -52
        r_pod_eff = min(r_pod, max(int(np.count_nonzero(sy > sy_tol)), 1))
        clamp_warn(r_pod, r_pod_eff, "global output POD")
        W_yr = Wy[:, :r_pod_eff]

        n_s = ds.n_states
        # (I kron W_yr) applied block-by-block: A_i~ = W_yr^T A_i W_yr
        WA_t = np.hstack([
            W_yr.T @ G_A[:, i * n_s:(i + 1) * n_s] @ W_yr
            for i in range(self.basis_x.count)
        ])
        WB_t = W_yr.T @ G_B
        return ReducedLpvModel(
            W_A_tilde=WA_t, W_B_tilde=WB_t, pod_transform=W_yr,
            basis_x=self.basis_x, basis_u=self.basis_u,
            cfg=TruncationConfig(r_pr_eff, r_pod_eff, cfg.regularization),
            data_abs_max=ds.abs_max(),
        )


def fit_global(dataset: SnapshotDataset, basis_x: SchedulingBasis,
               basis_u: SchedulingBasis | None, cfg: TruncationConfig,
               method: str = "auto") -> ReducedLpvModel:
    """One-shot reduced-weight identification (see GlobalLpvFitter for sweeps)."""
    return GlobalLpvFitter(dataset, basis_x, basis_u, method=method).fit(cfg)


def fit_full_least_squares(dataset: SnapshotDataset, basis_x: SchedulingBasis,
                           basis_u: SchedulingBasis | None, lam: float = 0.0,
                           rank: int | None = None,
                           method: str = "auto") -> FullLpvModel:
    """Full-space LPV baseline; ``rank`` optionally limits the solution rank."""
    fitter = GlobalLpvFitter(dataset, basis_x, basis_u, method=method)
    return fitter.fit_fullspace(rank=rank, lam=lam)


def predict_lpv(model, u_traj, p_traj, x0, threshold: float | None = None):
    """Free-run simulation of an LPV model (full or reduced).

    Returns (states, diverged_step); states are full-coordinate columns
    including the initial condition, truncated at divergence when the
    instability threshold is crossed.
    """
    return model.simulate(x0, u_traj, p_traj, threshold=threshold)
