"""Metrics and experiment drivers: one-step MSE, free-run comparison and
rank sweeps, with lossless CSV reporting.

The MSE is the double mean over states and samples of the squared
prediction error. One-step (teacher-forced) evaluation advances each
measured state by one model step; free-run evaluation gives the model only
the initial condition and the exogenous signals.
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .excitation import LocalDatasetBundle, SnapshotDataset
from .features import SchedulingBasis
from .global_lpv import GlobalLpvFitter
from .local_lpv import fit_local_fullspace, fit_local_latent, identify_lti_collection
from .numerics import TruncationConfig
from .plant import DiffusionPlant, Trajectory, probe_index, simulate


@dataclass
class EvalReport:
    """Outcome of one model-vs-data comparison."""

    mse: float
    per_state_mse: np.ndarray
    diverged: bool = False
    diverged_step: int | None = None
    probe_series: np.ndarray | None = None  # rows: time, truth, model
    config: dict = field(default_factory=dict)


@dataclass
class SweepPoint:
    rank_pr: int | None
    rank_pr_eff: int
    rank_pod: int | None
    basis: str
    mse: float
    diverged: bool = False
    note: str = ""


@dataclass
class SweepResult:
    kind: str
    basis: str
    points: list[SweepPoint] = field(default_factory=list)

    def mse_by_rank(self) -> dict:
        return {(p.rank_pr, p.rank_pod): p.mse for p in self.points}


def mse_matrix(truth: np.ndarray, predicted: np.ndarray) -> float:
    return float(np.mean((truth - predicted) ** 2))


def one_step_mse(model, dataset: SnapshotDataset, config: dict | None = None) -> EvalReport:
    """Teacher-forced evaluation against a snapshot dataset.

    Every prediction starts from the measured state (projected into the
    reduced space for reduced models) and is compared in full coordinates.
    """
    predicted = model.one_step(dataset.X, dataset.U, dataset.P)
    err2 = (predicted - dataset.Y) ** 2
    per_state = err2.mean(axis=1)
    return EvalReport(
        mse=float(err2.mean()),
        per_state_mse=per_state,
        config=config or {},
    )


def free_run(model, plant: DiffusionPlant, u_traj: np.ndarray, p_traj: np.ndarray,
             x0: np.ndarray | None = None, probe_x: float = 0.98,
             truth: Trajectory | None = None,
             threshold: float | None = None,
             config: dict | None = None) -> EvalReport:
    """Simulate model and plant from the initial condition only.

    A diverged model run is recorded, not raised: the MSE covers the
    pre-divergence prefix and the report carries the halt step. The probe
    series tracks the grid point nearest ``probe_x``.
    """
    if truth is None:
        truth = simulate(plant, x0, u_traj, p_traj)
    x_init = truth.states[:, 0] if x0 is None else np.asarray(x0, dtype=float)
    states, diverged_step = model.simulate(x_init, u_traj, p_traj, threshold=threshold)

    n_cols = states.shape[1]
    err2 = (states[:, 1:] - truth.states[:, 1:n_cols]) ** 2
    per_state = err2.mean(axis=1) if err2.size else np.zeros(plant.n_states)
    idx = probe_index(plant, probe_x)
    probe = np.vstack([
        truth.times()[:n_cols],
        truth.states[idx, :n_cols],
        states[idx],
    ])
    return EvalReport(
        mse=float(err2.mean()) if err2.size else float("nan"),
        per_state_mse=per_state,
        diverged=diverged_step is not None,
        diverged_step=diverged_step,
        probe_series=probe,
        config=config or {},
    )


def run_rank_sweep(
    kind: str,
    eval_dataset: SnapshotDataset,
    basis_x: SchedulingBasis,
    basis_u: SchedulingBasis | None = None,
    procrustes_ranks=None,
    pod_ranks=None,
    lam: float = 0.0,
    bundle: LocalDatasetBundle | None = None,
    fitter: GlobalLpvFitter | None = None,
    threads: int = 1,
) -> SweepResult:
    """One fit + one-step evaluation per rank point.

    Kinds: "procrustes" (full-space global fits over ``procrustes_ranks``,
    None meaning full rank), "pod" (reduced global fits over the cartesian
    product of the rank lists) and "local-full" / "local-latent" (shared
    POD/Procrustes rank over ``pod_ranks``, fit on ``bundle``). Failures
    are recorded per point and the sweep continues.
    """
    if kind in ("procrustes", "pod") and fitter is None:
        fitter = GlobalLpvFitter(eval_dataset, basis_x, basis_u)
    collection = None
    if kind == "local-full":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            collection = identify_lti_collection(bundle, lam)
    result = SweepResult(kind=kind, basis=basis_x.name)

    if kind == "procrustes":
        jobs = [(r, None) for r in procrustes_ranks]
    elif kind == "pod":
        jobs = [(rp, rq) for rp in procrustes_ranks for rq in pod_ranks]
    elif kind in ("local-full", "local-latent"):
        if bundle is None:
            raise ValueError("local sweeps need a frozen-parameter bundle")
        jobs = [(None, r) for r in pod_ranks]
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")

    def run_point(job):
        r_pr, r_pod = job
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if kind == "procrustes":
                    model = fitter.fit_fullspace(rank=r_pr, lam=lam)
                    eff = model.rank or fitter.effective_rank()
                elif kind == "pod":
                    model = fitter.fit(TruncationConfig(r_pr, r_pod, lam))
                    eff = model.cfg.procrustes_rank
                elif kind == "local-full":
                    _, model = fit_local_fullspace(bundle, basis_x, basis_u,
                                                   r=r_pod, lam=lam,
                                                   lti_collection=collection)
                    eff = model.cfg.procrustes_rank
                else:
                    _, model = fit_local_latent(bundle, basis_x, basis_u,
                                                r=r_pod, lam=lam)
                    eff = model.cfg.procrustes_rank
            report = one_step_mse(model, eval_dataset)
            return SweepPoint(r_pr, eff, r_pod, basis_x.name, report.mse)
        except Exception as exc:  # recorded, sweep continues
            return SweepPoint(r_pr, 0, r_pod, basis_x.name, float("nan"),
                              note=f"failed: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(run_point, jobs))
    else:
        points = [run_point(j) for j in jobs]
    result.points = points
    return result


# -- CSV reporting ----------------------------------------------------------
#
# Every writer starts with "# config: <json>" echo lines, then one header
# row. Floats are serialized with repr() so a read-back is bit-lossless.


def _write_config_echo(fh, config: dict | None):
    if config:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")


def write_sweep_csv(result: SweepResult, path, config: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _write_config_echo(fh, config)
        writer = csv.writer(fh)
        writer.writerow(["rank_pr", "rank_pr_eff", "rank_pod", "basis",
                         "mse", "diverged", "note"])
        for p in result.points:
            writer.writerow([
                "full" if p.rank_pr is None else p.rank_pr,
                p.rank_pr_eff,
                "" if p.rank_pod is None else p.rank_pod,
                p.basis, repr(p.mse), int(p.diverged), p.note,
            ])


def read_sweep_csv(path) -> SweepResult:
    points = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        points.append(SweepPoint(
            rank_pr=None if row[0] == "full" else int(row[0]),
            rank_pr_eff=int(row[1]),
            rank_pod=None if row[2] == "" else int(row[2]),
            basis=row[3],
            mse=float(row[4]),
            diverged=bool(int(row[5])),
            note=row[6],
        ))
    return SweepResult(kind="", basis=points[0].basis if points else "", points=points)


def write_report_csv(report: EvalReport, path) -> None:
    """Summary metrics then one row per state MSE."""
    with open(path, "w", newline="") as fh:
        _write_config_echo(fh, report.config)
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["mse", repr(report.mse)])
        writer.writerow(["diverged", int(report.diverged)])
        writer.writerow(["diverged_step",
                         "" if report.diverged_step is None else report.diverged_step])
        writer.writerow(["state", "mse"])
        for i, v in enumerate(report.per_state_mse):
            writer.writerow([f"T_{i + 1}", repr(float(v))])


def write_probe_csv(report: EvalReport, path) -> None:
    if report.probe_series is None:
        raise ValueError("report has no probe series")
    with open(path, "w", newline="") as fh:
        _write_config_echo(fh, report.config)
        writer = csv.writer(fh)
        writer.writerow(["t", "truth", "model"])
        for t, truth, model in report.probe_series.T:
            writer.writerow([repr(float(t)), repr(float(truth)), repr(float(model))])
