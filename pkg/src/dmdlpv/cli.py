"""Command-line front end: gen-data, train, eval, reproduce, info.

Exit codes: 0 success, 2 configuration/schema errors, 3 numeric failures
(including reproduction thresholds not met), 4 a free-run evaluation
flagged divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import figures, model_io
from .dmdc import fit_dmdc
from .evaluation import (
    free_run,
    one_step_mse,
    write_probe_csv,
    write_report_csv,
)
from .excitation import SnapshotDataset
from .experiments import (
    REPRODUCE_TARGETS,
    ConfigError,
    ExperimentConfig,
    experiment1_config,
    generate_global_dataset,
    generate_local_bundle,
    load_config,
    make_basis,
    make_plant,
    make_test_signals,
)
from .global_lpv import GlobalLpvFitter
from .local_lpv import fit_local_full_order, fit_local_fullspace, fit_local_latent
from .numerics import TruncationConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_DIVERGED = 4


def _load_cfg(path: str | None) -> ExperimentConfig:
    return experiment1_config() if path is None else load_config(path)


def cmd_gen_data(args) -> int:
    cfg = _load_cfg(args.config)
    if args.local:
        plant, bundle = generate_local_bundle(cfg)
        model_io.save_bundle(args.out, bundle, meta=cfg.to_dict())
        sizes = {ds.n_samples for ds in bundle.datasets}
        print(f"wrote bundle: {len(bundle)} frozen systems, "
              f"{plant.n_states} states, {sizes.pop()} samples each, "
              f"master seed {bundle.master_seed} (splitmix64)")
    else:
        plant, dataset = generate_global_dataset(cfg)
        model_io.save_dataset(args.out, dataset, meta=cfg.to_dict())
        print(f"wrote dataset: n_states={dataset.n_states} "
              f"n_samples={dataset.n_samples} n_params={dataset.n_params} "
              f"seed={cfg.excitation.seed} (splitmix64)")
        if args.csv:
            model_io.export_dataset_csv(dataset, args.csv)
            print(f"CSV export: {args.csv}")
    return EXIT_OK


def _train_model(cfg: ExperimentConfig, container_path: str):
    header = model_io.read_header(container_path)
    kind = cfg.fit.kind
    basis = make_basis(cfg)
    lam = cfg.fit.regularization
    if kind in ("global", "full-ls", "dmdc"):
        if header.get("kind") != "dataset":
            raise ConfigError(f"fit kind {kind!r} needs a dataset container")
        dataset, _ = model_io.load_dataset(container_path)
        if kind == "dmdc":
            model = fit_dmdc(dataset, TruncationConfig(
                cfg.fit.procrustes_rank, cfg.fit.pod_rank, lam))
        elif kind == "global":
            fitter = GlobalLpvFitter(dataset, basis)
            model = fitter.fit(TruncationConfig(
                cfg.fit.procrustes_rank, cfg.fit.pod_rank, lam))
        else:
            fitter = GlobalLpvFitter(dataset, basis)
            model = fitter.fit_fullspace(rank=None, lam=lam)
        return model, dataset
    if kind in ("local-full", "local-latent", "local-full-order"):
        if header.get("kind") != "bundle":
            raise ConfigError(f"fit kind {kind!r} needs a bundle container")
        bundle, _ = model_io.load_bundle(container_path)
        if kind == "local-full":
            _, model = fit_local_fullspace(bundle, basis, None,
                                           r=cfg.fit.pod_rank, lam=lam)
        elif kind == "local-latent":
            _, model = fit_local_latent(bundle, basis, None,
                                        r=cfg.fit.pod_rank, lam=lam)
        else:
            _, model = fit_local_full_order(bundle, basis, None, lam=lam)
        merged = SnapshotDataset(
            X=np.hstack([d.X for d in bundle.datasets]),
            U=np.hstack([d.U for d in bundle.datasets]),
            Y=np.hstack([d.Y for d in bundle.datasets]),
            P=np.hstack([d.P for d in bundle.datasets]),
            sample_time=bundle.datasets[0].sample_time,
        )
        return model, merged
    raise ConfigError(f"unknown fit kind {kind!r}")


def cmd_train(args) -> int:
    cfg = _load_cfg(args.config)
    model, train_data = _train_model(cfg, args.dataset)
    model_io.save_model(args.out, model, meta=cfg.to_dict())
    mse = one_step_mse(model, train_data).mse
    print(f"trained {model.kind} model -> {args.out}")
    print(f"training one-step MSE: {mse:.6e}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args.config)
    model = model_io.load_model(args.model)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.mode == "one-step":
        if not args.dataset:
            raise ConfigError("one-step evaluation needs --dataset")
        dataset, _ = model_io.load_dataset(args.dataset)
        report = one_step_mse(model, dataset, config=cfg.to_dict())
        write_report_csv(report, out_dir / "one_step_report.csv")
        print(f"one-step MSE: {report.mse:.6e}")
        return EXIT_OK

    plant = make_plant(cfg)
    u_test, p_test = make_test_signals(cfg, plant)
    report = free_run(model, plant, u_test, p_test,
                      probe_x=cfg.eval.probe_x, config=cfg.to_dict())
    write_report_csv(report, out_dir / "free_run_report.csv")
    write_probe_csv(report, out_dir / "free_run_probe.csv")
    figures.plot_probe_comparison([(model.kind, report)],
                                  out_dir / "free_run_probe.png",
                                  title="free run at probe point")
    if report.diverged:
        print(f"free run DIVERGED at step {report.diverged_step}; "
              f"prefix MSE {report.mse:.6e}")
        return EXIT_DIVERGED
    print(f"free-run MSE: {report.mse:.6e}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    fn = REPRODUCE_TARGETS[args.target]
    kwargs = {"threads": args.threads}
    if args.target == "exp2":
        kwargs["full_scale"] = args.full_scale
    else:
        kwargs["smoke"] = args.smoke
    checks = fn(args.out_dir, **kwargs)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {args.target}/{c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC


def cmd_info(args) -> int:
    header = model_io.read_header(args.path)
    print(json.dumps(header, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmdlpv",
        description="Reduced-order LPV system identification toolkit",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for sweep evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate and store identification data")
    p.add_argument("--config", help="JSON experiment config (defaults built in)")
    p.add_argument("--out", required=True, help="output container (.npz)")
    p.add_argument("--local", action="store_true",
                   help="generate the frozen-parameter bundle instead")
    p.add_argument("--csv", help="also export the dataset as CSV")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="fit a model on stored data")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--dataset", required=True, help="dataset or bundle container")
    p.add_argument("--out", required=True, help="output model container (.npz)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a stored model")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", help="dataset container (one-step mode)")
    p.add_argument("--mode", choices=["one-step", "free-run"], default="one-step")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("reproduce", help="run a pinned-seed reproduction target")
    p.add_argument("--target", choices=sorted(REPRODUCE_TARGETS), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--smoke", action="store_true",
                   help="reduced-horizon variant for quick runs")
    p.add_argument("--full-scale", action="store_true",
                   help="full 240000-sample horizon for the exp2 target")
    p.set_defaults(fn=cmd_reproduce)

    p = sub.add_parser("info", help="print a container header")
    p.add_argument("path")
    p.set_defaults(fn=cmd_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.fn(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
