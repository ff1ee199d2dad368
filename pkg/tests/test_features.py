import numpy as np
import pytest

import dmdlpv as dl
from dmdlpv.features import kron_columns


class TestBasisConstructors:
    def test_exact_has_four_features(self):
        assert dl.basis_exact_1p().count == 4

    def test_under_has_three_features(self):
        assert dl.basis_under_1p().count == 3

    def test_over_has_five_features(self):
        assert dl.basis_over_1p().count == 5

    def test_nesting(self):
        under = dl.basis_under_1p().monomials
        exact = dl.basis_exact_1p().monomials
        over = dl.basis_over_1p().monomials
        assert exact[: len(under)] == under
        assert over[: len(exact)] == exact

    def test_constant_must_come_first(self):
        with pytest.raises(ValueError):
            dl.SchedulingBasis(1, ((1,), (0,)))

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            dl.SchedulingBasis(1, ((0,), (1,), (1,)))


class TestTotalDegree:
    def test_univariate_cubic(self):
        b = dl.basis_total_degree(1, 3)
        assert b.monomials == ((0,), (1,), (2,), (3,))

    def test_bivariate_linear(self):
        b = dl.basis_total_degree(2, 1)
        assert b.monomials == ((0, 0), (1, 0), (0, 1))

    def test_bivariate_degree5_count(self):
        # oracle: enumerate exponent pairs with e1 + e2 <= 5
        expected = sum(1 for e1 in range(6) for e2 in range(6) if e1 + e2 <= 5)
        assert expected == 21
        assert dl.basis_total_degree(2, 5).count == expected

    def test_graded_order(self):
        b = dl.basis_total_degree(2, 2)
        degrees = [sum(m) for m in b.monomials]
        assert degrees == sorted(degrees)


class TestEvalBasis:
    def test_exact_at_zero(self):
        assert np.array_equal(dl.eval_basis(dl.basis_exact_1p(), [0.0]), [1, 0, 0, 0])

    def test_exact_powers_of_two(self):
        assert np.array_equal(dl.eval_basis(dl.basis_exact_1p(), [2.0]), [1, 2, 4, 8])

    def test_degree5_bivariate_at_ones(self):
        out = dl.eval_basis(dl.basis_total_degree(2, 5), [1.0, 1.0])
        assert out.shape == (21,)
        assert np.all(out == 1.0)

    def test_constant_first_convention(self, rng):
        basis = dl.basis_total_degree(2, 3)
        for _ in range(5):
            theta = rng.uniform(0, 1, 2)
            assert dl.eval_basis(basis, theta)[0] == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            dl.eval_basis(dl.basis_exact_1p(), [0.1, 0.2])

    def test_trajectory_matches_pointwise(self, rng):
        basis = dl.basis_total_degree(2, 4)
        P = rng.uniform(0, 1, size=(2, 20))
        M = dl.eval_basis_trajectory(basis, P)
        for k in range(20):
            assert np.allclose(M[:, k], dl.eval_basis(basis, P[:, k]))


class TestAssembleFeatures:
    def _dataset(self, rng, n_s=2, n_p=1, N=4):
        return dl.SnapshotDataset(
            X=rng.normal(size=(n_s, N)),
            U=rng.normal(size=(1, N)),
            Y=rng.normal(size=(n_s, N)),
            P=rng.uniform(0, 1, size=(n_p, N)),
            sample_time=1.0,
        )

    def test_dimension_law(self, rng):
        ds = self._dataset(rng, n_s=2, N=4)
        fm = dl.assemble_features(ds, dl.basis_under_1p())
        assert fm.X_P.shape == (6, 4)
        assert fm.U_P.shape == (3, 4)

    def test_constant_only_basis_is_identity(self, rng):
        ds = self._dataset(rng)
        fm = dl.assemble_features(ds, dl.SchedulingBasis(1, ((0,),)))
        assert np.array_equal(fm.X_P, ds.X)
        assert np.array_equal(fm.U_P, ds.U)

    def test_columns_match_kron_vec_oracle(self, rng):
        ds = self._dataset(rng, n_s=3, N=6)
        basis = dl.basis_exact_1p()
        fm = dl.assemble_features(ds, basis)
        for k in range(6):
            phi = dl.eval_basis(basis, ds.P[:, k])
            assert np.allclose(fm.X_P[:, k], dl.kron_vec(phi, ds.X[:, k]))
            assert np.allclose(fm.U_P[:, k], dl.kron_vec(phi, ds.U[:, k]))

    def test_distinct_input_basis(self, rng):
        ds = self._dataset(rng)
        fm = dl.assemble_features(ds, dl.basis_exact_1p(), dl.basis_under_1p())
        assert fm.X_P.shape[0] == 4 * 2 and fm.U_P.shape[0] == 3

    def test_param_count_mismatch(self, rng):
        ds = self._dataset(rng, n_p=2)
        with pytest.raises(ValueError):
            dl.assemble_features(ds, dl.basis_exact_1p())


def test_kron_columns_requires_matching_counts(rng):
    with pytest.raises(ValueError):
        kron_columns(rng.normal(size=(2, 3)), rng.normal(size=(2, 4)))
