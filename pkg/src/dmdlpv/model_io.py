"""Self-describing containers for datasets, bundles and fitted models.

Containers are npz archives written with pinned zip timestamps so a given
(config, seed) pair always produces the same bytes. Every file carries a
JSON header with the container kind, dimensions, provenance metadata and,
for datasets, the name of the random generator that produced them
("splitmix64").
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from .excitation import RNG_NAME, LocalDatasetBundle, SnapshotDataset
from .features import SchedulingBasis
from .dmdc import ReducedLti
from .global_lpv import FullLpvModel, ReducedLpvModel
from .local_lpv import LtiCollection
from .numerics import TruncationConfig

FORMAT_VERSION = 1
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _save_arrays(path, header: dict, arrays: dict) -> None:
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("header.json", date_time=_ZIP_EPOCH)
        zf.writestr(info, json.dumps(header, sort_keys=True, indent=1))
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr))
            info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
            zf.writestr(info, buf.getvalue())


def _load_arrays(path) -> tuple[dict, dict]:
    arrays = {}
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("header.json"))
        for name in zf.namelist():
            if name.endswith(".npy"):
                arrays[name[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(name)))
    return header, arrays


def read_header(path) -> dict:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("header.json"))


def _basis_to_json(basis: SchedulingBasis) -> dict:
    return {"n_params": basis.n_params,
            "monomials": [list(m) for m in basis.monomials],
            "name": basis.name}


def _basis_from_json(data: dict) -> SchedulingBasis:
    return SchedulingBasis(
        n_params=data["n_params"],
        monomials=tuple(tuple(m) for m in data["monomials"]),
        name=data.get("name", ""),
    )


# -- datasets ----------------------------------------------------------------


def save_dataset(path, dataset: SnapshotDataset, meta: dict | None = None) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "dataset",
        "rng": RNG_NAME,
        "n_states": dataset.n_states,
        "n_inputs": dataset.n_inputs,
        "n_params": dataset.n_params,
        "n_samples": dataset.n_samples,
        "sample_time": dataset.sample_time,
        "meta": meta or {},
    }
    _save_arrays(path, header, {"X": dataset.X, "U": dataset.U,
                                "Y": dataset.Y, "P": dataset.P})


def load_dataset(path) -> tuple[SnapshotDataset, dict]:
    header, arrays = _load_arrays(path)
    if header.get("kind") != "dataset":
        raise ValueError(f"{path} is a {header.get('kind')!r} container, not a dataset")
    ds = SnapshotDataset(X=arrays["X"], U=arrays["U"], Y=arrays["Y"],
                         P=arrays["P"], sample_time=header["sample_time"])
    return ds, header.get("meta", {})


def export_dataset_csv(dataset: SnapshotDataset, path) -> None:
    """Interoperability export: one row per snapshot (t, u..., p..., x..., y...)."""
    import csv

    header = ["t"]
    header += [f"u{i + 1}" for i in range(dataset.n_inputs)]
    header += [f"p{i + 1}" for i in range(dataset.n_params)]
    header += [f"x{i + 1}" for i in range(dataset.n_states)]
    header += [f"y{i + 1}" for i in range(dataset.n_states)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(dataset.n_samples):
            row = [repr(k * dataset.sample_time)]
            row += [repr(float(v)) for v in dataset.U[:, k]]
            row += [repr(float(v)) for v in dataset.P[:, k]]
            row += [repr(float(v)) for v in dataset.X[:, k]]
            row += [repr(float(v)) for v in dataset.Y[:, k]]
            writer.writerow(row)


# -- bundles -----------------------------------------------------------------


def save_bundle(path, bundle: LocalDatasetBundle, meta: dict | None = None) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "bundle",
        "rng": RNG_NAME,
        "n_systems": len(bundle),
        "master_seed": bundle.master_seed,
        "sample_time": bundle.datasets[0].sample_time if len(bundle) else 0.0,
        "meta": meta or {},
    }
    arrays = {}
    for i, (theta, ds) in enumerate(bundle):
        arrays[f"theta_{i}"] = theta
        arrays[f"X_{i}"] = ds.X
        arrays[f"U_{i}"] = ds.U
        arrays[f"Y_{i}"] = ds.Y
    _save_arrays(path, header, arrays)


def load_bundle(path) -> tuple[LocalDatasetBundle, dict]:
    header, arrays = _load_arrays(path)
    if header.get("kind") != "bundle":
        raise ValueError(f"{path} is a {header.get('kind')!r} container, not a bundle")
    bundle = LocalDatasetBundle(master_seed=header.get("master_seed", 0))
    for i in range(header["n_systems"]):
        theta = arrays[f"theta_{i}"]
        X = arrays[f"X_{i}"]
        P = np.tile(theta[:, None], (1, X.shape[1]))
        bundle.entries.append((theta, SnapshotDataset(
            X=X, U=arrays[f"U_{i}"], Y=arrays[f"Y_{i}"], P=P,
            sample_time=header["sample_time"],
        )))
    return bundle, header.get("meta", {})


# -- models ------------------------------------------------------------------


def save_model(path, model, meta: dict | None = None) -> None:
    """Persist a fitted model; the container records its kind tag."""
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "model",
        "model_kind": model.kind,
        "data_abs_max": model.data_abs_max,
        "meta": meta or {},
    }
    if isinstance(model, ReducedLti):
        header.update({
            "ranks": [model.ranks.procrustes_rank, model.ranks.pod_rank],
            "regularization": model.ranks.regularization,
            "basis": None,
        })
        arrays = {"pod_transform": model.pod_transform,
                  "A_tilde": model.A_tilde, "B_tilde": model.B_tilde}
    elif isinstance(model, ReducedLpvModel):
        header.update({
            "ranks": [model.cfg.procrustes_rank, model.cfg.pod_rank],
            "regularization": model.cfg.regularization,
            "basis_x": _basis_to_json(model.basis_x),
            "basis_u": _basis_to_json(model.basis_u),
        })
        arrays = {"pod_transform": model.pod_transform,
                  "W_A_tilde": model.W_A_tilde, "W_B_tilde": model.W_B_tilde}
    elif isinstance(model, FullLpvModel):
        header.update({
            "ranks": [model.rank, None],
            "regularization": model.regularization,
            "basis_x": _basis_to_json(model.basis_x),
            "basis_u": _basis_to_json(model.basis_u),
        })
        arrays = {"W_A": model.W_A, "W_B": model.W_B}
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    _save_arrays(path, header, arrays)


def load_model(path):
    header, arrays = _load_arrays(path)
    if header.get("kind") != "model":
        raise ValueError(f"{path} is a {header.get('kind')!r} container, not a model")
    kind = header["model_kind"]
    lam = header.get("regularization", 0.0)
    abs_max = header.get("data_abs_max", 1.0)
    if kind in ("dmdc", "frozen-lpv"):
        r_pr, r_pod = header["ranks"]
        return ReducedLti(
            A_tilde=arrays["A_tilde"], B_tilde=arrays["B_tilde"],
            pod_transform=arrays["pod_transform"],
            ranks=TruncationConfig(r_pr, r_pod, lam),
            data_abs_max=abs_max, kind=kind,
        )
    if kind == "full-ls":
        return FullLpvModel(
            W_A=arrays["W_A"], W_B=arrays["W_B"],
            basis_x=_basis_from_json(header["basis_x"]),
            basis_u=_basis_from_json(header["basis_u"]),
            regularization=lam, rank=header["ranks"][0],
            data_abs_max=abs_max,
        )
    if kind in ("global", "local-full", "local-latent"):
        r_pr, r_pod = header["ranks"]
        return ReducedLpvModel(
            W_A_tilde=arrays["W_A_tilde"], W_B_tilde=arrays["W_B_tilde"],
            pod_transform=arrays["pod_transform"],
            basis_x=_basis_from_json(header["basis_x"]),
            basis_u=_basis_from_json(header["basis_u"]),
            cfg=TruncationConfig(r_pr, r_pod, lam),
            data_abs_max=abs_max, kind=kind,
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_lti_collection(path, collection: LtiCollection, meta: dict | None = None) -> None:
    """Diagnostic sidecar with the per-parameter LTI matrices."""
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "lti-collection",
        "space": collection.space,
        "n_systems": len(collection),
        "meta": meta or {},
    }
    arrays = {"pod_transform": collection.pod_transform}
    for i, (theta, A, B) in enumerate(zip(collection.thetas, collection.A_list,
                                          collection.B_list)):
        arrays[f"theta_{i}"] = theta
        arrays[f"A_{i}"] = A
        arrays[f"B_{i}"] = B
    _save_arrays(path, header, arrays)


def load_lti_collection(path) -> LtiCollection:
    header, arrays = _load_arrays(path)
    if header.get("kind") != "lti-collection":
        raise ValueError(f"{path} is not an LTI collection container")
    n = header["n_systems"]
    return LtiCollection(
        thetas=[arrays[f"theta_{i}"] for i in range(n)],
        A_list=[arrays[f"A_{i}"] for i in range(n)],
        B_list=[arrays[f"B_{i}"] for i in range(n)],
        space=header["space"],
        pod_transform=arrays["pod_transform"],
    )
