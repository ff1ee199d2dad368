import numpy as np
import pytest

import dmdlpv as dl
from dmdlpv.local_lpv import frozen_dataset

from conftest import make_stable_lpv, simulate_lpv, simulate_lti


def _make_bundle(rng, basis, n_s=4, n_points=7, N=300):
    """Frozen-parameter bundle from a known LPV generator (rich data)."""
    W_A, W_B = make_stable_lpv(rng, n_s, basis)
    bundle = dl.LocalDatasetBundle(master_seed=1)
    for v in np.linspace(0, 1, n_points):
        theta = np.array([v])
        U = rng.normal(size=(1, N))
        P = np.tile(theta[:, None], (1, N))
        ds = simulate_lpv(W_A, W_B, basis, U, P, x0=rng.normal(size=n_s))
        bundle.entries.append((theta, ds))
    return (W_A, W_B), bundle


class TestPodFromBundle:
    def test_single_dataset_equals_direct_svd(self, rng):
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis, n_points=1)
        W = dl.pod_from_bundle(bundle, 3)
        direct = dl.truncated_svd(bundle.datasets[0].Y, 3).left_vectors
        # same subspace regardless of sign conventions
        assert np.allclose(np.abs(W.T @ direct), np.eye(3), atol=1e-10)

    def test_full_rank_square_orthogonal(self, rng):
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis, n_s=4)
        W = dl.pod_from_bundle(bundle, 4)
        assert W.shape == (4, 4)
        assert np.allclose(W.T @ W, np.eye(4), atol=1e-10)
        Y_tot = np.hstack([ds.Y for ds in bundle.datasets])
        assert np.linalg.norm(W @ W.T @ Y_tot - Y_tot) <= 1e-8

    def test_order_permutation_invariance(self, rng):
        # oracle: singular values are invariant under column permutation
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis)
        Y_tot = np.hstack([ds.Y for ds in bundle.datasets])
        s_ref = np.linalg.svd(Y_tot, compute_uv=False)
        reordered = dl.LocalDatasetBundle(entries=bundle.entries[::-1])
        Y_perm = np.hstack([ds.Y for ds in reordered.datasets])
        s_perm = np.linalg.svd(Y_perm, compute_uv=False)
        assert np.allclose(s_ref, s_perm, atol=1e-10)

    def test_empty_bundle_rejected(self):
        with pytest.raises(ValueError):
            dl.pod_from_bundle(dl.LocalDatasetBundle(), 2)


class TestLocalFits:
    def test_single_point_constant_basis_reproduces_lti(self, rng):
        # one frozen system, constant basis: the weight regression is a
        # one-point identity and must return that system's reduced pair
        const = dl.SchedulingBasis(1, ((0,),))
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis, n_points=1, n_s=3)
        coll, model = dl.fit_local_fullspace(bundle, const, None, r=3)
        W = model.pod_transform
        A_direct = W.T @ coll.A_list[0] @ W
        assert np.max(np.abs(model.W_A_tilde - A_direct)) <= 1e-9

    def test_recovers_generator_weights(self, rng):
        basis = dl.basis_exact_1p()
        (W_A, W_B), bundle = _make_bundle(rng, basis, n_s=3, n_points=9, N=400)
        _, model = dl.fit_local_full_order(bundle, basis)
        assert np.max(np.abs(model.W_A - W_A)) <= 1e-6
        assert np.max(np.abs(model.W_B - W_B)) <= 1e-6

    def test_variants_identical_at_full_rank(self, rng):
        # orthogonal-projection equivalence oracle: with a square POD both
        # algorithms produce identical lifted predictions
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis, n_s=4)
        _, m_full = dl.fit_local_fullspace(bundle, basis, None, r=4)
        _, m_lat = dl.fit_local_latent(bundle, basis, None, r=4)
        ds = bundle.datasets[2]
        a = m_full.one_step(ds.X, ds.U, ds.P)
        b = m_lat.one_step(ds.X, ds.U, ds.P)
        assert np.max(np.abs(a - b)) <= 1e-8

    def test_latent_never_forms_full_matrices(self, rng):
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis, n_s=4)
        coll, _ = dl.fit_local_latent(bundle, basis, None, r=2)
        assert coll.space == "latent"
        assert all(A.shape == (2, 2) for A in coll.A_list)

    def test_collection_reuse_matches_fresh_fit(self, rng):
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis)
        coll = dl.identify_lti_collection(bundle)
        _, fresh = dl.fit_local_fullspace(bundle, basis, None, r=3)
        _, reused = dl.fit_local_fullspace(bundle, basis, None, r=3,
                                           lti_collection=coll)
        assert np.array_equal(fresh.W_A_tilde, reused.W_A_tilde)

    def test_interpolation_consistency_at_training_points(self, rng):
        # evaluating the fitted weights at a training theta reproduces the
        # projected LTI within the regression residual
        basis = dl.basis_exact_1p()
        _, bundle = _make_bundle(rng, basis, n_s=3, n_points=9, N=400)
        coll, model = dl.fit_local_fullspace(bundle, basis, None, r=3)
        W = model.pod_transform
        for theta, A in zip(coll.thetas, coll.A_list):
            frozen = model.freeze(theta)
            projected = W.T @ A @ W
            assert np.max(np.abs(frozen.A_tilde - projected)) <= 1e-6

    def test_deficient_excitation_warns_with_theta(self, rng):
        # block-decoupled system: the input never reaches states 4..6, so
        # the stacked regressor from a rest start is rank deficient
        basis = dl.basis_exact_1p()
        A = np.zeros((6, 6))
        A[:3, :3] = 0.5 * np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        A[3:, 3:] = 0.4 * np.eye(3)
        B = np.vstack([rng.normal(size=(3, 1)), np.zeros((3, 1))])
        theta = np.array([0.5])
        lti = simulate_lti(A, B, rng.normal(size=(1, 80)))
        ds = dl.SnapshotDataset(X=lti.X, U=lti.U, Y=lti.Y,
                                P=np.tile(theta[:, None], (1, 80)),
                                sample_time=1.0)
        bundle = dl.LocalDatasetBundle(entries=[(theta, ds)])
        with pytest.warns(UserWarning, match="0.5"):
            dl.fit_local_fullspace(bundle, basis, None, r=2)


def test_frozen_dataset_detector(rng):
    ds_frozen = dl.SnapshotDataset(
        X=rng.normal(size=(2, 5)), U=rng.normal(size=(1, 5)),
        Y=rng.normal(size=(2, 5)), P=np.full((1, 5), 0.3), sample_time=1.0)
    ds_moving = dl.SnapshotDataset(
        X=rng.normal(size=(2, 5)), U=rng.normal(size=(1, 5)),
        Y=rng.normal(size=(2, 5)), P=rng.uniform(0, 1, (1, 5)), sample_time=1.0)
    assert frozen_dataset(ds_frozen) and not frozen_dataset(ds_moving)
