"""Model files: JSON for the SVM pipelines, ``.npz`` for the CNN.

Floats are written with ``repr`` precision (JSON) or raw float64 (npz), so
a reloaded model predicts bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cnn import CnnArchitecture, CnnModel
from .core import CamidError, TrainedModel
from .svm import BinarySvm, KernelSpec, MulticlassSvm, Standardizer

FORMAT_VERSION = 1


class ModelFileError(CamidError):
    pass


def _binary_to_dict(m: BinarySvm | None):
    if m is None:
        return None
    return {
        "support_vectors": m.support_vectors.tolist(),
        "dual_coef": m.dual_coef.tolist(),
        "bias": m.bias,
        "C": m.C,
        "n_iter": m.n_iter,
        "converged": m.converged,
    }


def _binary_from_dict(d, kernel: KernelSpec, n_features: int):
    if d is None:
        return None
    sv = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, n_features)
    return BinarySvm(sv, np.array(d["dual_coef"], dtype=np.float64), float(d["bias"]), kernel,
                     float(d["C"]), int(d.get("n_iter", 0)), bool(d.get("converged", True)))


def svm_model_to_dict(model: TrainedModel) -> dict:
    payload: MulticlassSvm = model.payload
    std: Standardizer = model.preprocessing["standardizer"]
    kernel = next(m for m in payload.models if m is not None).kernel
    return {
        "format": "camid-svm",
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "labels": list(model.label_names),
        "kernel": {"kind": kernel.kind, "gamma": kernel.gamma},
        "standardizer": {"mean": std.mean.tolist(), "std": std.std.tolist()},
        "n_features": payload.n_features,
        "models": [_binary_to_dict(m) for m in payload.models],
        "extraction": model.preprocessing.get("extraction", {}),
    }


def svm_model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != "camid-svm" or d.get("version") != FORMAT_VERSION:
        raise ModelFileError(f"unsupported SVM model document (format={d.get('format')}, "
                             f"version={d.get('version')})")
    kernel = KernelSpec(d["kernel"]["kind"], d["kernel"]["gamma"])
    n_features = int(d["n_features"])
    models = tuple(_binary_from_dict(m, kernel, n_features) for m in d["models"])
    std = Standardizer(np.array(d["standardizer"]["mean"]), np.array(d["standardizer"]["std"]))
    pre = {"standardizer": std, "extraction": d.get("extraction", {})}
    return TrainedModel(d["kind"], tuple(d["labels"]), MulticlassSvm(models, n_features), pre)


def save_model(model: TrainedModel, path) -> Path:
    path = Path(path)
    if model.kind == "cnn":
        if path.suffix != ".npz":
            path = path.with_suffix(".npz")
        cm: CnnModel = model.payload
        meta = {
            "format": "camid-cnn",
            "version": FORMAT_VERSION,
            "labels": list(model.label_names),
            "arch": cm.arch.to_dict(),
            "seed": cm.seed,
            "preprocessing": model.preprocessing,
        }
        arrays = {f"param_{k}": v for k, v in cm.params.items()}
        np.savez(path, meta=np.array(json.dumps(meta)), **arrays)
        return path
    path.write_text(json.dumps(svm_model_to_dict(model)))
    return path


def load_model(path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise ModelFileError(f"model file not found: {path}")
    if path.suffix == ".npz":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != "camid-cnn" or meta.get("version") != FORMAT_VERSION:
                raise ModelFileError(f"{path}: unsupported CNN model container")
            params = {k[len("param_"):]: z[k].copy() for k in z.files if k.startswith("param_")}
        a = meta["arch"]
        arch = CnnArchitecture(a["input_size"], a["in_channels"], tuple(a["filters"]),
                               a["hidden"], a["n_classes"])
        return TrainedModel("cnn", tuple(meta["labels"]), CnnModel(arch, params, meta["seed"]),
                            meta.get("preprocessing", {}))
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not a model document ({exc})") from exc
    return svm_model_from_dict(d)
