"""Experiment configuration schema and end-to-end reproduction pipelines.

Configs are strict JSON: unknown keys are rejected and every field has a
default mirroring the single-parameter polynomial-gain experiment
(h = 0.02, 90000 samples at T_s = 1e-3, stair holds of 10000 samples).
The ``reproduce_*`` pipelines regenerate pinned-seed data, run the fits,
emit CSV bundles with rendered figures, and grade themselves against the
acceptance thresholds, returning one CheckResult per threshold.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import figures
from .evaluation import (
    EvalReport,
    free_run,
    one_step_mse,
    run_rank_sweep,
    write_probe_csv,
    write_sweep_csv,
)
from .excitation import (
    AprbsConfig,
    build_global_dataset,
    build_local_bundle,
    dataset_from_trajectory,
    derive_seeds,
)
from .features import (
    SchedulingBasis,
    basis_exact_1p,
    basis_over_1p,
    basis_total_degree,
    basis_under_1p,
)
from .global_lpv import GlobalLpvFitter
from .local_lpv import (
    fit_local_full_order,
    fit_local_fullspace,
    fit_local_latent,
    identify_lti_collection,
)
from .numerics import TruncationConfig
from .plant import (
    DEFAULT_POLY_GAIN,
    DiffusionPlant,
    GainFunction,
    build_plant,
    probe_index,
    simulate,
)

# Master seed for the pinned reproduction pipelines.
MASTER_SEED = 0x5EED_D1FF

# Reference MSE levels the reproduction targets grade against.
REF_TABLE1_RANK10 = 1.47e-5
REF_TABLE1_FULL = 1.23e-14
REF_LOCAL_FULL_ORDER = 1.39e-7
REF_EXP2_TRAIN = 6.742e-6
REF_EXP2_ONESTEP = 5.874e-7


class ConfigError(ValueError):
    """Raised for malformed or unknown configuration content."""


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            value = data[f.name]
            if isinstance(value, list):
                value = tuple(value)
            kwargs[f.name] = value
    return cls(**kwargs)


@dataclass(frozen=True)
class PlantSection:
    h: float = 0.02
    advection_w: float = 0.1
    gain_kind: str = "polynomial-1p"
    gain_coefficients: tuple = DEFAULT_POLY_GAIN
    dt: float = 1e-3
    sample_time: float = 1e-3


@dataclass(frozen=True)
class ExcitationSection:
    u_range: tuple = (0.0, 4.0)
    u_hold: int = 10000
    p_range: tuple = (0.0, 1.0)
    p_hold: int = 10000
    horizon: int = 90000
    seed: int = MASTER_SEED


@dataclass(frozen=True)
class BasisSection:
    kind: str = "exact"  # exact | under | over | total-degree
    degree: int = 3
    n_params: int = 1


@dataclass(frozen=True)
class FitSection:
    kind: str = "global"  # dmdc | global | full-ls | local-full | local-latent
    procrustes_rank: int = 50
    pod_rank: int | None = 10
    regularization: float = 0.0
    local_grid: tuple = tuple(round(0.1 * i, 10) for i in range(11))
    local_horizon: int = 12000
    local_u_hold: int = 100


@dataclass(frozen=True)
class EvalSection:
    probe_x: float = 0.98
    test_seed: int = MASTER_SEED + 1
    test_horizon: int = 20000
    test_u_hold: int = 2000
    test_p_hold: int = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantSection = field(default_factory=PlantSection)
    excitation: ExcitationSection = field(default_factory=ExcitationSection)
    basis: BasisSection = field(default_factory=BasisSection)
    fit: FitSection = field(default_factory=FitSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        known = {"plant", "excitation", "basis", "fit", "eval"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        return cls(
            plant=_from_dict(PlantSection, data.get("plant", {}), "plant"),
            excitation=_from_dict(ExcitationSection, data.get("excitation", {}),
                                  "excitation"),
            basis=_from_dict(BasisSection, data.get("basis", {}), "basis"),
            fit=_from_dict(FitSection, data.get("fit", {}), "fit"),
            eval=_from_dict(EvalSection, data.get("eval", {}), "eval"),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)


def experiment1_config(smoke: bool = False) -> ExperimentConfig:
    """Defaults: the single-parameter polynomial-gain study."""
    cfg = ExperimentConfig()
    if smoke:
        cfg = ExperimentConfig(
            excitation=ExcitationSection(u_hold=1000, p_hold=1000, horizon=9000),
            eval=EvalSection(test_horizon=4000, test_u_hold=500, test_p_hold=500),
        )
    return cfg


def experiment2_config(full_scale: bool = False) -> ExperimentConfig:
    """Two-parameter rational-gain study on the finer grid.

    The integrator step is 5e-4: with h = 0.01 the diffusion eigenvalues
    reach about -4 k_max / h^2 = -4444 1/s, and explicit RK4 needs
    |lambda| dt < 2.785, so the nominal 1e-3 step would blow up.
    """
    horizon = 240000 if full_scale else 24000
    return ExperimentConfig(
        plant=PlantSection(h=0.01, gain_kind="rational-2p", dt=5e-4,
                           sample_time=0.01),
        excitation=ExcitationSection(u_hold=2000, p_hold=150, horizon=horizon,
                                     seed=MASTER_SEED + 2),
        basis=BasisSection(kind="total-degree", degree=5, n_params=2),
        fit=FitSection(kind="global", procrustes_rank=110, pod_rank=5,
                       regularization=0.05),
        eval=EvalSection(probe_x=0.99, test_seed=MASTER_SEED + 3,
                         test_horizon=8000, test_u_hold=2000, test_p_hold=500),
    )


# -- builders -----------------------------------------------------------------


def make_plant(cfg: ExperimentConfig) -> DiffusionPlant:
    p = cfg.plant
    if p.gain_kind == "polynomial-1p":
        gain = GainFunction(kind="polynomial-1p",
                            coefficients=tuple(p.gain_coefficients))
    elif p.gain_kind == "rational-2p":
        gain = GainFunction(kind="rational-2p")
    else:
        raise ConfigError(f"unsupported gain kind {p.gain_kind!r} in config")
    return build_plant(h=p.h, w=p.advection_w, gain=gain, dt=p.dt,
                       sample_time=p.sample_time)


def make_basis(cfg: ExperimentConfig) -> SchedulingBasis:
    b = cfg.basis
    if b.kind == "exact":
        return basis_exact_1p()
    if b.kind == "under":
        return basis_under_1p()
    if b.kind == "over":
        return basis_over_1p()
    if b.kind == "total-degree":
        return basis_total_degree(b.n_params, b.degree)
    raise ConfigError(f"unknown basis kind {b.kind!r}")


def excitation_configs(cfg: ExperimentConfig,
                       n_params: int) -> tuple[AprbsConfig, list[AprbsConfig]]:
    exc = cfg.excitation
    seeds = derive_seeds(exc.seed, 1 + n_params)
    u_cfg = AprbsConfig(tuple(exc.u_range), exc.u_hold, exc.horizon, seeds[0])
    p_cfgs = [AprbsConfig(tuple(exc.p_range), exc.p_hold, exc.horizon, s)
              for s in seeds[1:]]
    return u_cfg, p_cfgs


def generate_global_dataset(cfg: ExperimentConfig, plant: DiffusionPlant | None = None):
    if plant is None:
        plant = make_plant(cfg)
    u_cfg, p_cfgs = excitation_configs(cfg, plant.n_params)
    return plant, build_global_dataset(plant, u_cfg, p_cfgs)


def generate_local_bundle(cfg: ExperimentConfig, plant: DiffusionPlant | None = None):
    if plant is None:
        plant = make_plant(cfg)
    f = cfg.fit
    seed = derive_seeds(cfg.excitation.seed, 2 + plant.n_params)[-1]
    u_cfg = AprbsConfig(tuple(cfg.excitation.u_range), f.local_u_hold,
                        f.local_horizon, seed)
    if plant.n_params == 1:
        grid = [np.array([v]) for v in f.local_grid]
    else:
        grid = [np.array(v, dtype=float) for v in f.local_grid]
    return plant, build_local_bundle(plant, grid, u_cfg, f.local_horizon)


def make_test_signals(cfg: ExperimentConfig, plant: DiffusionPlant):
    """Held-out APRBS excitation for free-run / one-step test evaluation."""
    ev = cfg.eval
    seeds = derive_seeds(ev.test_seed, 1 + plant.n_params)
    u = AprbsConfig(tuple(cfg.excitation.u_range), ev.test_u_hold,
                    ev.test_horizon, seeds[0])
    p = [AprbsConfig(tuple(cfg.excitation.p_range), ev.test_p_hold,
                     ev.test_horizon, s) for s in seeds[1:]]
    from .excitation import aprbs

    return aprbs(u), np.vstack([aprbs(c) for c in p])


# -- reproduction pipelines ----------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _decades(a: float, b: float) -> float:
    return abs(math.log10(a) - math.log10(b))


def _write_summary(out_dir: Path, target: str, checks: list[CheckResult],
                   config: dict) -> None:
    import csv

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["target", "check", "passed", "detail"])
        for c in checks:
            writer.writerow([target, c.name, int(c.passed), c.detail])


def _echo(cfg: ExperimentConfig, extra: dict | None = None) -> dict:
    data = cfg.to_dict()
    if extra:
        data.update(extra)
    return data


def reproduce_table1(out_dir, smoke: bool = False, threads: int = 1) -> list[CheckResult]:
    """Rank sweep of the full-space global fit for the three basis choices."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = experiment1_config(smoke=smoke)
    plant, dataset = generate_global_dataset(cfg)
    ranks = [10, 20, 30, 40, 50, 60, 80, 100, 120, None]

    sweeps = []
    for basis in (basis_exact_1p(), basis_under_1p(), basis_over_1p()):
        sweep = run_rank_sweep("procrustes", dataset, basis,
                               procrustes_ranks=ranks, threads=threads)
        write_sweep_csv(sweep, out_dir / f"table1_{basis.name}.csv",
                        config=_echo(cfg, {"basis": basis.name}))
        sweeps.append((basis.name, sweep))
    figures.plot_rank_sweep(sweeps, out_dir / "table1.png",
                            title="training MSE vs Procrustes rank")

    exact = sweeps[0][1].points
    mse = {p.rank_pr: p.mse for p in exact}
    low = [mse[r] for r in (10, 20, 30, 40, 50)]
    checks = [CheckResult(
        "monotone-ranks-10-50",
        all(a > b for a, b in zip(low, low[1:])),
        "MSE " + " > ".join(f"{v:.3e}" for v in low),
    )]
    if not smoke:
        span = _decades(mse[10], mse[50])
        checks.append(CheckResult("span-7-decades", span >= 7.0,
                                  f"rank 10 -> 50 spans {span:.2f} decades"))
        full = next(p.mse for p in exact if p.rank_pr is None)
        checks.append(CheckResult("full-rank-mse", full <= 1e-12,
                                  f"full-rank MSE {full:.3e} <= 1e-12"))
    _write_summary(out_dir, "table1", checks, _echo(cfg))
    return checks


def reproduce_pod_sweep(out_dir, smoke: bool = False,
                        threads: int = 1) -> list[CheckResult]:
    """Reduced-fit MSE as a function of the POD rank, per Procrustes rank."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = experiment1_config(smoke=smoke)
    plant, dataset = generate_global_dataset(cfg)
    basis = basis_exact_1p()
    fitter = GlobalLpvFitter(dataset, basis)
    pr_ranks = [60] if smoke else [40, 50, 60, 80]
    pod_ranks = [5, 15, 25, 49] if smoke else [1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 49]

    sweeps = []
    for r_pr in pr_ranks:
        sweep = run_rank_sweep("pod", dataset, basis, procrustes_ranks=[r_pr],
                               pod_ranks=pod_ranks, fitter=fitter, threads=threads)
        write_sweep_csv(sweep, out_dir / f"pod_sweep_pr{r_pr}.csv",
                        config=_echo(cfg, {"procrustes_rank": r_pr}))
        sweeps.append((f"Procrustes rank {r_pr}", sweep))
    figures.plot_rank_sweep(sweeps, out_dir / "pod_sweep.png",
                            title="training MSE vs POD rank", xlabel="POD rank")

    at60 = dict((p.rank_pod, p.mse) for _, s in sweeps for p in s.points
                if p.rank_pr == 60)
    if smoke:
        checks = [CheckResult(
            "pod-diminishing-returns",
            at60[25] <= at60[5],
            f"MSE pod 25 ({at60[25]:.3e}) <= pod 5 ({at60[5]:.3e})")]
    else:
        gap = _decades(at60[20], at60[49])
        checks = [CheckResult(
            "pod-20-within-decade-of-49", gap <= 1.0,
            f"rank 60: pod 20 {at60[20]:.3e} vs pod 49 {at60[49]:.3e} "
            f"({gap:.2f} decades)")]
    _write_summary(out_dir, "pod-sweep", checks, _echo(cfg))
    return checks


def reproduce_local_tables(out_dir, smoke: bool = False,
                           threads: int = 1) -> list[CheckResult]:
    """Local identification tables: full-space vs latent variants per basis."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = experiment1_config(smoke=smoke)
    plant, dataset = generate_global_dataset(cfg)
    _, bundle = generate_local_bundle(cfg, plant)
    ranks = [5, 10] if smoke else [1, 5, 10, 15, 20, 25, 30, 35, 40, 45]

    results = {}
    sweeps = []
    for basis in (basis_exact_1p(), basis_under_1p(), basis_over_1p()):
        for kind in ("local-full", "local-latent"):
            sweep = run_rank_sweep(kind, dataset, basis, pod_ranks=ranks,
                                   bundle=bundle, threads=threads)
            write_sweep_csv(sweep, out_dir / f"local_{kind}_{basis.name}.csv",
                            config=_echo(cfg, {"kind": kind, "basis": basis.name}))
            results[(kind, basis.name)] = {p.rank_pod: p.mse for p in sweep.points}
            if basis.name == "exact":
                sweeps.append((kind, sweep))
    figures.plot_rank_sweep(sweeps, out_dir / "local_tables.png",
                            title="one-step MSE vs shared rank", xlabel="rank")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, full_order = fit_local_full_order(bundle, basis_exact_1p())
    full_order_mse = one_step_mse(full_order, dataset).mse

    checks = [CheckResult(
        "full-order-exactness",
        _decades(full_order_mse, REF_LOCAL_FULL_ORDER) <= 1.0,
        f"full-order one-step MSE {full_order_mse:.3e} vs reference "
        f"{REF_LOCAL_FULL_ORDER:.3e}")]
    agree_ranks = [5, 10] if smoke else [5, 10, 15, 20]
    for r in agree_ranks:
        f = results[("local-full", "exact")][r]
        l = results[("local-latent", "exact")][r]
        rel = abs(f - l) / max(f, l)
        checks.append(CheckResult(
            f"variant-agreement-r{r}", rel <= 0.01,
            f"full {f:.3e} vs latent {l:.3e} ({100 * rel:.2f}%)"))
    for name in ("underestimated", "overestimated"):
        for r in agree_ranks:
            e = results[("local-latent", "exact")][r]
            o = results[("local-latent", name)][r]
            rel = abs(o - e) / max(o, e)
            checks.append(CheckResult(
                f"structure-insensitivity-{name}-r{r}", rel <= 0.01,
                f"exact {e:.3e} vs {name} {o:.3e} ({100 * rel:.2f}%)"))
    _write_summary(out_dir, "local-tables", checks, _echo(cfg))
    return checks


def reproduce_sim_test(out_dir, smoke: bool = False,
                       threads: int = 1) -> list[CheckResult]:
    """Free-run comparison on held-out test signals, probe at x = 0.98."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = experiment1_config(smoke=smoke)
    plant, dataset = generate_global_dataset(cfg)
    _, bundle = generate_local_bundle(cfg, plant)
    basis = basis_exact_1p()
    u_test, p_test = make_test_signals(cfg, plant)
    truth = simulate(plant, None, u_test, p_test)
    figures.plot_dataset_overview(truth, out_dir / "test_signals.png",
                                  probe_idx=probe_index(plant, cfg.eval.probe_x))

    fitter = GlobalLpvFitter(dataset, basis)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        collection = identify_lti_collection(bundle)
        jobs = []
        local_ranks = [5] if smoke else [5, 10, 15]
        global_ranks = [(50, 10)] if smoke else [(r_pr, r_pod)
                                                 for r_pr in (40, 50, 60)
                                                 for r_pod in (5, 10, 15)]
        for r in local_ranks:
            _, model = fit_local_fullspace(bundle, basis, None, r=r,
                                           lti_collection=collection)
            jobs.append((f"local r={r}", model))
        for r_pr, r_pod in global_ranks:
            jobs.append((f"global ({r_pr},{r_pod})",
                         fitter.fit(TruncationConfig(r_pr, r_pod))))

    reports = []
    for label, model in jobs:
        rep = free_run(model, plant, u_test, p_test, truth=truth,
                       probe_x=cfg.eval.probe_x,
                       config=_echo(cfg, {"model": label}))
        slug = (label.replace(" ", "_").replace("=", "")
                .replace("(", "").replace(")", "").replace(",", "-"))
        write_probe_csv(rep, out_dir / f"probe_{slug}.csv")
        reports.append((label, rep))
    figures.plot_probe_comparison(reports, out_dir / "sim_test.png",
                                  title="free-run at probe point")

    def rms_ratio(rep: EvalReport) -> float:
        t, truth_probe, model_probe = rep.probe_series
        dev = np.sqrt(np.mean((truth_probe - truth_probe.mean()) ** 2))
        err = np.sqrt(np.mean((model_probe - truth_probe) ** 2))
        return err / dev

    by_label = dict(reports)
    local5 = by_label["local r=5"]
    glob = by_label["global (50,10)"]
    checks = [
        CheckResult("local-r5-stable", not local5.diverged,
                    "local rank-5 free run completed"),
        CheckResult("local-r5-probe-rms", rms_ratio(local5) <= 0.10,
                    f"probe RMS error ratio {rms_ratio(local5):.4f} <= 0.10"),
        CheckResult("global-50-10-stable", not glob.diverged,
                    "global (50,10) free run completed"),
    ]
    diverged = [label for label, rep in reports if rep.diverged]
    if diverged:
        checks.append(CheckResult("diverged-runs", True,
                                  "halted: " + "; ".join(diverged)))
    _write_summary(out_dir, "sim-test", checks, _echo(cfg))
    return checks


def reproduce_exp2(out_dir, full_scale: bool = False,
                   threads: int = 1) -> list[CheckResult]:
    """Two-parameter rational-gain pipeline: reduced fit vs full baseline."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = experiment2_config(full_scale=full_scale)
    plant, dataset = generate_global_dataset(cfg)
    basis = basis_total_degree(2, cfg.basis.degree)
    lam = cfg.fit.regularization

    fitter = GlobalLpvFitter(dataset, basis, method="gram")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reduced = fitter.fit(TruncationConfig(cfg.fit.procrustes_rank,
                                              cfg.fit.pod_rank, lam))
        full = fitter.fit_fullspace(rank=None, lam=lam)
    train_reduced = one_step_mse(reduced, dataset).mse
    train_full = one_step_mse(full, dataset).mse

    u_test, p_test = make_test_signals(cfg, plant)
    test_traj = simulate(plant, None, u_test, p_test)
    test_ds = dataset_from_trajectory(test_traj)
    test_reduced = one_step_mse(reduced, test_ds).mse
    test_full = one_step_mse(full, test_ds).mse

    rep_r = free_run(reduced, plant, u_test, p_test, truth=test_traj,
                     probe_x=cfg.eval.probe_x, config=_echo(cfg, {"model": "reduced"}))
    rep_f = free_run(full, plant, u_test, p_test, truth=test_traj,
                     probe_x=cfg.eval.probe_x, config=_echo(cfg, {"model": "full-ls"}))
    write_probe_csv(rep_r, out_dir / "probe_reduced.csv")
    write_probe_csv(rep_f, out_dir / "probe_full_ls.csv")
    figures.plot_probe_comparison(
        [(f"reduced (r_pr={cfg.fit.procrustes_rank}, r_pod={cfg.fit.pod_rank})", rep_r),
         ("full least squares", rep_f)],
        out_dir / "exp2_sim.png", title="rational-gain plant, free run at probe")

    import csv

    with open(out_dir / "exp2_metrics.csv", "w", newline="") as fh:
        fh.write("# config: " + json.dumps(_echo(cfg), sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["model", "train_mse", "test_one_step_mse", "diverged"])
        writer.writerow(["reduced", repr(train_reduced), repr(test_reduced),
                         int(rep_r.diverged)])
        writer.writerow(["full-ls", repr(train_full), repr(test_full),
                         int(rep_f.diverged)])

    tol = 2.0 if full_scale else 3.0
    checks = [
        CheckResult("train-mse-decades",
                    _decades(train_reduced, REF_EXP2_TRAIN) <= tol,
                    f"reduced train MSE {train_reduced:.3e} within {tol:.0f} "
                    f"decades of {REF_EXP2_TRAIN:.3e}"),
        CheckResult("one-step-mse-decades",
                    _decades(test_reduced, REF_EXP2_ONESTEP) <= tol,
                    f"reduced test one-step MSE {test_reduced:.3e} within "
                    f"{tol:.0f} decades of {REF_EXP2_ONESTEP:.3e}"),
        CheckResult("full-ls-beats-reduced", test_full < test_reduced,
                    f"full {test_full:.3e} < reduced {test_reduced:.3e}"),
    ]
    _write_summary(out_dir, "exp2", checks, _echo(cfg))
    return checks


REPRODUCE_TARGETS = {
    "table1": reproduce_table1,
    "pod-sweep": reproduce_pod_sweep,
    "local-tables": reproduce_local_tables,
    "sim-test": reproduce_sim_test,
    "exp2": reproduce_exp2,
}
