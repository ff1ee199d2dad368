import numpy as np
import pytest

import dmdlpv as dl
from dmdlpv import model_io
from dmdlpv.numerics import TruncationConfig

from conftest import make_stable_lpv, simulate_lpv


@pytest.fixture
def lpv_dataset(rng):
    basis = dl.basis_exact_1p()
    W_A, W_B = make_stable_lpv(rng, 3, basis)
    return basis, simulate_lpv(W_A, W_B, basis, rng.normal(size=(1, 120)),
                               rng.uniform(0, 1, (1, 120)), x0=rng.normal(size=3))


class TestDatasetContainer:
    def test_round_trip(self, lpv_dataset, tmp_path):
        _, ds = lpv_dataset
        path = tmp_path / "data.npz"
        model_io.save_dataset(path, ds, meta={"seed": 7})
        back, meta = model_io.load_dataset(path)
        assert np.array_equal(back.X, ds.X)
        assert np.array_equal(back.Y, ds.Y)
        assert np.array_equal(back.U, ds.U)
        assert np.array_equal(back.P, ds.P)
        assert back.sample_time == ds.sample_time
        assert meta == {"seed": 7}

    def test_header_is_self_describing(self, lpv_dataset, tmp_path):
        _, ds = lpv_dataset
        path = tmp_path / "data.npz"
        model_io.save_dataset(path, ds)
        header = model_io.read_header(path)
        assert header["kind"] == "dataset"
        assert header["rng"] == "splitmix64"
        assert header["n_states"] == 3 and header["n_samples"] == 120

    def test_deterministic_bytes(self, lpv_dataset, tmp_path):
        _, ds = lpv_dataset
        a, b = tmp_path / "a.npz", tmp_path / "b.npz"
        model_io.save_dataset(a, ds, meta={"k": 1})
        model_io.save_dataset(b, ds, meta={"k": 1})
        assert a.read_bytes() == b.read_bytes()

    def test_wrong_kind_rejected(self, lpv_dataset, tmp_path):
        basis, ds = lpv_dataset
        path = tmp_path / "model.npz"
        model = dl.fit_full_least_squares(ds, basis, None)
        model_io.save_model(path, model)
        with pytest.raises(ValueError):
            model_io.load_dataset(path)

    def test_csv_export(self, lpv_dataset, tmp_path):
        _, ds = lpv_dataset
        path = tmp_path / "data.csv"
        model_io.export_dataset_csv(ds, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t," + "u1,p1," + ",".join(
            [f"x{i + 1}" for i in range(3)] + [f"y{i + 1}" for i in range(3)])
        assert len(lines) == 1 + ds.n_samples


class TestBundleContainer:
    def test_round_trip(self, rng, tmp_path):
        plant = dl.build_plant(h=0.1)
        grid = [np.array([0.1]), np.array([0.9])]
        u_cfg = dl.AprbsConfig((0.0, 4.0), 10, 100, seed=3)
        bundle = dl.build_local_bundle(plant, grid, u_cfg)
        path = tmp_path / "bundle.npz"
        model_io.save_bundle(path, bundle)
        back, _ = model_io.load_bundle(path)
        assert len(back) == 2
        for (t0, d0), (t1, d1) in zip(bundle, back):
            assert np.array_equal(t0, t1)
            assert np.array_equal(d0.X, d1.X)
            assert np.array_equal(d0.P, d1.P)


class TestModelContainer:
    def test_reduced_lpv_round_trip(self, lpv_dataset, tmp_path, rng):
        basis, ds = lpv_dataset
        model = dl.fit_global(ds, basis, None, TruncationConfig(10, 3, 0.01))
        path = tmp_path / "m.npz"
        model_io.save_model(path, model, meta={"note": "test"})
        back = model_io.load_model(path)
        assert isinstance(back, dl.ReducedLpvModel)
        assert back.kind == "global"
        assert np.array_equal(back.W_A_tilde, model.W_A_tilde)
        assert np.array_equal(back.pod_transform, model.pod_transform)
        assert back.basis_x.monomials == basis.monomials
        assert back.cfg.regularization == 0.01
        # predictions survive the round trip bit for bit
        assert np.array_equal(back.one_step(ds.X, ds.U, ds.P),
                              model.one_step(ds.X, ds.U, ds.P))

    def test_full_lpv_round_trip(self, lpv_dataset, tmp_path):
        basis, ds = lpv_dataset
        model = dl.fit_full_least_squares(ds, basis, None)
        path = tmp_path / "m.npz"
        model_io.save_model(path, model)
        back = model_io.load_model(path)
        assert isinstance(back, dl.FullLpvModel)
        assert np.array_equal(back.W_A, model.W_A)

    def test_dmdc_round_trip(self, rng, tmp_path):
        from conftest import simulate_lti

        A = np.array([[0.8, 0.1], [0.0, 0.6]])
        B = np.array([[0.5], [1.0]])
        ds = simulate_lti(A, B, rng.normal(size=(1, 100)), x0=rng.normal(size=2))
        model = dl.fit_dmdc(ds, TruncationConfig(3, 2, 0.0))
        path = tmp_path / "m.npz"
        model_io.save_model(path, model)
        back = model_io.load_model(path)
        assert isinstance(back, dl.ReducedLti)
        assert np.array_equal(back.A_tilde, model.A_tilde)
        assert back.ranks.pod_rank == 2

    def test_local_kind_tag_preserved(self, rng, tmp_path):
        basis = dl.basis_exact_1p()
        W_A, W_B = make_stable_lpv(rng, 3, basis)
        bundle = dl.LocalDatasetBundle()
        for v in (0.0, 0.5, 1.0):
            theta = np.array([v])
            ds = simulate_lpv(W_A, W_B, basis, rng.normal(size=(1, 80)),
                              np.tile(theta[:, None], (1, 80)))
            bundle.entries.append((theta, ds))
        _, model = dl.fit_local_latent(bundle, basis, None, r=2)
        path = tmp_path / "m.npz"
        model_io.save_model(path, model)
        assert model_io.read_header(path)["model_kind"] == "local-latent"
        assert model_io.load_model(path).kind == "local-latent"

    def test_lti_collection_sidecar(self, rng, tmp_path):
        basis = dl.basis_exact_1p()
        _, bundle = _tiny_bundle(rng, basis)
        coll = dl.identify_lti_collection(bundle)
        path = tmp_path / "coll.npz"
        model_io.save_lti_collection(path, coll)
        back = model_io.load_lti_collection(path)
        assert back.space == "full"
        assert np.array_equal(back.A_list[0], coll.A_list[0])


def _tiny_bundle(rng, basis):
    W_A, W_B = make_stable_lpv(rng, 3, basis)
    bundle = dl.LocalDatasetBundle()
    for v in (0.2, 0.8):
        theta = np.array([v])
        ds = simulate_lpv(W_A, W_B, basis, rng.normal(size=(1, 60)),
                          np.tile(theta[:, None], (1, 60)))
        bundle.entries.append((theta, ds))
    return (W_A, W_B), bundle
