"""Scheduling-basis evaluation and Kronecker-feature matrix assembly.

A scheduling basis is a list of monomials over the parameter vector,
constant term first. Feature matrices pair each basis evaluation with the
state (or input) column through a Kronecker product; both identification
paths consume them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np


@dataclass(frozen=True)
class SchedulingBasis:
    """Monomial basis for the parameter-dependent model coefficients.

    ``monomials`` holds one exponent tuple per basis function (length
    ``n_params`` each), the first being all zeros (the constant 1). The
    feature count includes the constant.
    """

    n_params: int
    monomials: tuple[tuple[int, ...], ...]
    name: str = ""

    def __post_init__(self):
        if self.n_params < 1:
            raise ValueError("n_params must be >= 1")
        if not self.monomials:
            raise ValueError("basis needs at least the constant monomial")
        if any(len(m) != self.n_params for m in self.monomials):
            raise ValueError("every exponent tuple must have length n_params")
        if self.monomials[0] != (0,) * self.n_params:
            raise ValueError("first monomial must be the constant (all-zero exponents)")
        if any(e < 0 for m in self.monomials for e in m):
            raise ValueError("exponents must be nonnegative")
        if len(set(self.monomials)) != len(self.monomials):
            raise ValueError("duplicate exponent tuples in basis")
        if not self.name:
            degree = max(sum(m) for m in self.monomials)
            object.__setattr__(self, "name", f"{self.n_params}p-deg{degree}")

    @property
    def count(self) -> int:
        return len(self.monomials)


@dataclass
class FeatureMatrices:
    """Columnwise basis evaluations and their Kronecker lift.

    ``X_P`` column k equals ``P_x[:, k] kron X[:, k]`` and likewise for
    ``U_P``; shapes are (count * n_s, N) and (count * n_u, N).
    """

    P_x: np.ndarray
    P_u: np.ndarray
    X_P: np.ndarray
    U_P: np.ndarray


def _graded_lex(n_params: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """All exponent tuples with total degree <= degree, graded-lex order."""
    out = []
    for total in range(degree + 1):
        level = []
        for combo in combinations_with_replacement(range(n_params), total):
            expo = [0] * n_params
            for idx in combo:
                expo[idx] += 1
            level.append(tuple(expo))
        # lexicographic within a degree level, highest leading exponent first
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


def basis_total_degree(n_params: int, degree: int) -> SchedulingBasis:
    """All monomials of total degree <= ``degree``, constant first."""
    if n_params < 1 or degree < 0:
        raise ValueError("need n_params >= 1 and degree >= 0")
    return SchedulingBasis(n_params, _graded_lex(n_params, degree))


def basis_exact_1p() -> SchedulingBasis:
    """Cubic one-parameter basis {1, p, p^2, p^3} matching the default plant gain."""
    return SchedulingBasis(1, ((0,), (1,), (2,), (3,)), name="exact")


def basis_under_1p() -> SchedulingBasis:
    """Quadratic basis {1, p, p^2}: misses the cubic term of the default gain."""
    return SchedulingBasis(1, ((0,), (1,), (2,)), name="underestimated")


def basis_over_1p() -> SchedulingBasis:
    """Quartic basis {1, p, ..., p^4}: one spurious term beyond the default gain."""
    return SchedulingBasis(1, ((0,), (1,), (2,), (3,), (4,)), name="overestimated")


def eval_basis(basis: SchedulingBasis, theta: np.ndarray) -> np.ndarray:
    """Evaluate all basis monomials at one parameter vector."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (basis.n_params,):
        raise ValueError(
            f"parameter vector has length {theta.size}, basis expects {basis.n_params}"
        )
    return np.array([np.prod(theta ** np.array(m)) for m in basis.monomials])


def eval_basis_trajectory(basis: SchedulingBasis, P: np.ndarray) -> np.ndarray:
    """Evaluate the basis at every column of an (n_params x N) trajectory."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[0] != basis.n_params:
        raise ValueError(
            f"parameter trajectory has {P.shape[0]} rows, basis expects {basis.n_params}"
        )
    out = np.empty((basis.count, P.shape[1]))
    for i, m in enumerate(basis.monomials):
        col = np.ones(P.shape[1])
        for j, e in enumerate(m):
            if e:
                col = col * P[j] ** e
        out[i] = col
    return out


def kron_columns(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker product: column k of the result is A[:,k] kron B[:,k]."""
    if A.shape[1] != B.shape[1]:
        raise ValueError("column counts must match")
    return (A[:, None, :] * B[None, :, :]).reshape(A.shape[0] * B.shape[0], A.shape[1])


def assemble_features(dataset, basis_x: SchedulingBasis,
                      basis_u: SchedulingBasis | None = None) -> FeatureMatrices:
    """Build (P_x, P_u, X_P, U_P) for a snapshot dataset.

    ``basis_u`` defaults to ``basis_x``. Assembly is columnwise; no
    identity-Kronecker blowup is ever materialized.
    """
    if basis_u is None:
        basis_u = basis_x
    if basis_x.n_params != dataset.n_params or basis_u.n_params != dataset.n_params:
        raise ValueError("basis parameter count does not match dataset")
    P_x = eval_basis_trajectory(basis_x, dataset.P)
    P_u = P_x if basis_u is basis_x else eval_basis_trajectory(basis_u, dataset.P)
    return FeatureMatrices(
        P_x=P_x,
        P_u=P_u,
        X_P=kron_columns(P_x, dataset.X),
        U_P=kron_columns(P_u, dataset.U),
    )
