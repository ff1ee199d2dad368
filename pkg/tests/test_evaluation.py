import numpy as np
import pytest

import dmdlpv as dl
from dmdlpv.evaluation import read_sweep_csv
from dmdlpv.numerics import TruncationConfig

from conftest import make_stable_lpv, simulate_lpv


class _ExactOneStep:
    """Wraps a generator into a perfect one-step predictor."""

    def __init__(self, W_A, W_B, basis):
        self.W_A, self.W_B, self.basis = W_A, W_B, basis
        self.kind = "oracle"

    def one_step(self, X, U, P):
        out = np.empty_like(X)
        for k in range(X.shape[1]):
            phi = dl.eval_basis(self.basis, P[:, k])
            out[:, k] = self.W_A @ np.kron(phi, X[:, k]) \
                + self.W_B @ np.kron(phi, U[:, k])
        return out


class _ZeroModel:
    kind = "zero"

    def one_step(self, X, U, P):
        return np.zeros_like(X)


class TestOneStepMse:
    def test_self_prediction_is_exact(self, rng):
        basis = dl.basis_exact_1p()
        W_A, W_B = make_stable_lpv(rng, 3, basis)
        ds = simulate_lpv(W_A, W_B, basis, rng.normal(size=(1, 100)),
                          rng.uniform(0, 1, (1, 100)), x0=rng.normal(size=3))
        report = dl.one_step_mse(_ExactOneStep(W_A, W_B, basis), ds)
        assert report.mse <= 1e-20

    def test_zero_model_closed_form(self, rng):
        basis = dl.basis_exact_1p()
        W_A, W_B = make_stable_lpv(rng, 3, basis)
        ds = simulate_lpv(W_A, W_B, basis, rng.normal(size=(1, 100)),
                          rng.uniform(0, 1, (1, 100)), x0=rng.normal(size=3))
        report = dl.one_step_mse(_ZeroModel(), ds)
        assert report.mse == pytest.approx(np.mean(ds.Y ** 2))

    def test_formula_on_hand_checkable_instance(self):
        # 2 states x 2 samples: MSE = (1/(N n_s)) sum of squared errors
        ds = dl.SnapshotDataset(
            X=np.zeros((2, 2)), U=np.zeros((1, 2)),
            Y=np.array([[1.0, 2.0], [3.0, 4.0]]),
            P=np.zeros((1, 2)), sample_time=1.0)
        report = dl.one_step_mse(_ZeroModel(), ds)
        assert report.mse == pytest.approx((1 + 4 + 9 + 16) / 4)
        assert np.allclose(report.per_state_mse, [(1 + 4) / 2, (9 + 16) / 2])
        assert report.mse == pytest.approx(report.per_state_mse.mean())


class TestFreeRun:
    def _setup(self, horizon=400):
        plant = dl.build_plant(h=0.1)
        u = dl.aprbs(dl.AprbsConfig((0.0, 4.0), 50, horizon, seed=21))
        p = dl.aprbs(dl.AprbsConfig((0.0, 1.0), 80, horizon, seed=22))[None, :]
        return plant, u, p

    def test_plant_vs_itself_zero_error(self, rng):
        # a model wrapping the plant's own propagators is error free
        plant, u, p = self._setup()

        class PlantModel:
            kind = "plant"
            data_abs_max = 10.0

            def simulate(self, x0, U, P, threshold=None):
                traj = dl.simulate(plant, x0, np.atleast_2d(U)[0], P)
                return traj.states, None

        report = dl.free_run(PlantModel(), plant, u, p)
        assert report.mse <= 1e-20
        assert not report.diverged
        assert report.probe_series.shape[0] == 3

    def test_divergence_recorded_not_thrown(self):
        plant, u, p = self._setup()
        basis = dl.basis_exact_1p()
        W_A = np.hstack([1.6 * np.eye(plant.n_states)]
                        + [np.zeros((plant.n_states, plant.n_states))] * 3)
        W_B = np.zeros((plant.n_states, 4))
        bad = dl.FullLpvModel(W_A=W_A, W_B=W_B, basis_x=basis, basis_u=basis,
                              data_abs_max=1.0)
        report = dl.free_run(bad, plant, u, p, x0=np.ones(plant.n_states))
        assert report.diverged and report.diverged_step is not None

    def test_free_run_at_least_one_step_mse(self, rng):
        # teacher forcing cannot be worse than accumulating free run here
        plant, u, p = self._setup()
        ds = dl.dataset_from_trajectory(dl.simulate(plant, None, u, p))
        model = dl.fit_global(ds, dl.basis_exact_1p(), None,
                              TruncationConfig(30, 6, 0.0))
        one_step = dl.one_step_mse(model, ds)
        free = dl.free_run(model, plant, u, p)
        assert free.mse >= one_step.mse


class TestRankSweep:
    def _dataset(self, rng):
        basis = dl.basis_exact_1p()
        W_A, W_B = make_stable_lpv(rng, 4, basis)
        return basis, simulate_lpv(W_A, W_B, basis, rng.normal(size=(1, 500)),
                                   rng.uniform(0, 1, (1, 500)),
                                   x0=rng.normal(size=4))

    def test_single_point_matches_direct_fit(self, rng):
        basis, ds = self._dataset(rng)
        sweep = dl.run_rank_sweep("procrustes", ds, basis, procrustes_ranks=[6])
        direct = dl.fit_full_least_squares(ds, basis, None, rank=6)
        assert len(sweep.points) == 1
        assert sweep.points[0].mse == pytest.approx(
            dl.one_step_mse(direct, ds).mse, rel=1e-12)

    def test_failure_recorded_sweep_continues(self, rng):
        basis, ds = self._dataset(rng)
        sweep = dl.run_rank_sweep("procrustes", ds, basis,
                                  procrustes_ranks=[-3, 6])
        assert len(sweep.points) == 2
        assert sweep.points[0].note.startswith("failed")
        assert np.isnan(sweep.points[0].mse)
        assert np.isfinite(sweep.points[1].mse)

    def test_threads_match_serial(self, rng):
        basis, ds = self._dataset(rng)
        serial = dl.run_rank_sweep("procrustes", ds, basis,
                                   procrustes_ranks=[4, 8, 12])
        threaded = dl.run_rank_sweep("procrustes", ds, basis,
                                     procrustes_ranks=[4, 8, 12], threads=2)
        assert [p.mse for p in serial.points] == [p.mse for p in threaded.points]

    def test_csv_round_trip_lossless(self, rng, tmp_path):
        basis, ds = self._dataset(rng)
        sweep = dl.run_rank_sweep("procrustes", ds, basis,
                                  procrustes_ranks=[4, 8, None])
        path = tmp_path / "sweep.csv"
        dl.write_sweep_csv(sweep, path, config={"seed": 1})
        back = read_sweep_csv(path)
        for a, b in zip(sweep.points, back.points):
            assert a.rank_pr == b.rank_pr
            assert a.mse == b.mse  # bit-exact via repr round trip
            assert a.diverged == b.diverged


class TestReportCsv:
    def test_report_and_probe_files(self, tmp_path, rng):
        report = dl.EvalReport(
            mse=1.25e-7,
            per_state_mse=np.array([1e-7, 1.5e-7]),
            probe_series=np.array([[0.0, 1.0], [0.5, 0.6], [0.51, 0.59]]),
            config={"case": "demo"},
        )
        rpath = tmp_path / "report.csv"
        ppath = tmp_path / "probe.csv"
        dl.write_report_csv(report, rpath)
        dl.write_probe_csv(report, ppath)
        text = rpath.read_text()
        assert "# config:" in text and repr(1.25e-7) in text
        lines = ppath.read_text().strip().splitlines()
        assert lines[1] == "t,truth,model"
        assert len(lines) == 4
