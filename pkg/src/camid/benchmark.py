"""Per-method pipelines and the shared-split benchmark."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cnn as cnn_mod
from .core import CamidError, Dataset, DecodeError, SplitIndices, TrainedModel
from .evaluate import DEFAULT_RATIO, DEFAULT_SEED, EvaluationReport, stratified_split
from .ingest import ResizeSpec, cnn_input, decode_image, to_grayscale
from .jpeg_features import jpeg_feature_vector
from .prnu_features import PrnuConfig, prnu_feature_vector
from .svm import KernelSpec, fit_standardizer, scale_gamma, train_multiclass

log = logging.getLogger(__name__)

METHODS = ("jpeg", "prnu", "cnn")
MODEL_KIND = {"jpeg": "jpeg-svm", "prnu": "prnu-svm", "cnn": "cnn"}


@dataclass(frozen=True)
class SvmSettings:
    C: float = 1.0
    gamma: float | None = None  # None: 1 / (d * Var(X_train_standardized))
    tol: float = 1e-3
    max_iter: int = 100_000


@dataclass(frozen=True)
class CnnSettings:
    epochs: int = 5
    batch_size: int = 8
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    input_size: int = 128
    filters: tuple = (32, 64, 128)
    hidden: int = 64


@dataclass
class PreparedInputs:
    """Per-method model inputs for the records that decoded cleanly."""

    kept: list[int]
    labels: np.ndarray
    arrays: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # method -> message
    decode_failures: list = field(default_factory=list)


def check_methods(methods) -> tuple[str, ...]:
    methods = tuple(methods)
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise CamidError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return methods


def prepare_inputs(dataset: Dataset, methods, prnu_cfg: PrnuConfig = PrnuConfig(),
                   resize: ResizeSpec = ResizeSpec(), on_decode_error: str = "abort") -> PreparedInputs:
    """Decode every record once and derive what each method consumes.

    Decoded pixels are dropped as soon as the per-method representations
    exist, so memory scales with feature size rather than image size.
    """
    methods = check_methods(methods)
    rows: dict[str, list] = {m: [] for m in methods}
    errors: dict[str, str] = {}
    kept: list[int] = []
    failures = []
    for i, rec in enumerate(dataset.records):
        try:
            rgb = decode_image(rec.path)
        except DecodeError as exc:
            if on_decode_error == "abort":
                raise
            log.warning("skipping %s", exc)
            failures.append(str(exc))
            continue
        kept.append(i)
        gray = to_grayscale(rgb) if ("jpeg" in methods or "prnu" in methods) else None
        for m in methods:
            if m in errors:
                continue
            try:
                if m == "jpeg":
                    rows[m].append(jpeg_feature_vector(gray))
                elif m == "prnu":
                    rows[m].append(prnu_feature_vector(gray, prnu_cfg))
                else:
                    rows[m].append(cnn_input(rgb, resize))
            except Exception as exc:  # isolate the failing method
                errors[m] = f"{rec.path}: {exc}"
                rows[m] = []
    labels = dataset.label_indices[kept] if kept else np.zeros(0, np.int64)
    arrays = {m: np.array(rows[m]) for m in methods if m not in errors}
    return PreparedInputs(kept, labels, arrays, errors, failures)


def fit_svm_method(method: str, X, y, label_names, settings: SvmSettings = SvmSettings(),
                   extraction: dict | None = None) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    std = fit_standardizer(X)
    Xs = std.apply(X)
    if method == "jpeg":
        gamma = settings.gamma if settings.gamma is not None else scale_gamma(Xs)
        kernel = KernelSpec("rbf", gamma)
    else:
        kernel = KernelSpec("linear")
    model = train_multiclass(Xs, y, kernel, settings.C, n_classes=len(label_names),
                             tol=settings.tol, max_iter=settings.max_iter)
    pre = {"standardizer": std, "extraction": extraction or {}}
    return TrainedModel(MODEL_KIND[method], tuple(label_names), model, pre)


def fit_cnn_method(X, y, label_names, settings: CnnSettings = CnnSettings(),
                   seed: int = DEFAULT_SEED) -> TrainedModel:
    arch = cnn_mod.CnnArchitecture(settings.input_size, 3, tuple(settings.filters),
                                   settings.hidden, len(label_names))
    cfg = cnn_mod.TrainConfig(settings.epochs, settings.batch_size,
                              cnn_mod.AdamConfig(settings.lr, settings.beta1, settings.beta2, settings.eps))
    model = cnn_mod.train_cnn(X, y, arch, seed, cfg)
    pre = {"resize": [settings.input_size, settings.input_size]}
    return TrainedModel("cnn", tuple(label_names), model, pre)


def predict_model(model: TrainedModel, X) -> np.ndarray:
    """Class ids for prepared inputs (feature rows, or CNN image batches)."""
    if model.kind == "cnn":
        return model.payload.predict(X)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        return np.zeros(0, np.int64)
    return model.payload.predict(model.preprocessing["standardizer"].apply(X))


def fit_method(method, X, y, label_names, svm_settings=SvmSettings(), cnn_settings=CnnSettings(),
               seed=DEFAULT_SEED, extraction=None) -> TrainedModel:
    if method == "cnn":
        return fit_cnn_method(X, y, label_names, cnn_settings, seed)
    return fit_svm_method(method, X, y, label_names, svm_settings, extraction)


def _evaluate_method(method, inputs: PreparedInputs, split: SplitIndices, label_names, seed,
                     svm_settings, cnn_settings, extraction):
    X = inputs.arrays[method]
    train = np.asarray(split.train, dtype=np.int64)
    test = np.asarray(split.test, dtype=np.int64)
    y = inputs.labels
    t0 = time.perf_counter()
    model = fit_method(method, X[train], y[train], label_names, svm_settings, cnn_settings, seed, extraction)
    t1 = time.perf_counter()
    pred = predict_model(model, X[test])
    # timings go to the log only: reports must be bitwise reproducible
    log.info("%s: trained in %.2fs, predicted in %.2fs", method, t1 - t0, time.perf_counter() - t1)
    return model, pred, {}


@dataclass
class BenchmarkResult:
    reports: list[EvaluationReport]
    split: SplitIndices | None
    models: dict
    inputs: PreparedInputs

    @property
    def any_failed(self) -> bool:
        return any(not r.ok for r in self.reports)


def run_benchmark(dataset: Dataset, methods=METHODS, seed: int = DEFAULT_SEED,
                  ratio: float = DEFAULT_RATIO, prnu_cfg: PrnuConfig = PrnuConfig(),
                  svm_settings: SvmSettings = SvmSettings(), cnn_settings: CnnSettings = CnnSettings(),
                  on_decode_error: str = "abort", dump_predictions: bool = False) -> BenchmarkResult:
    """Train and test every requested method on one shared stratified split.

    A failing method yields a report with ``error`` set; the others still run.
    """
    methods = check_methods(methods)
    label_names = dataset.label_names
    resize = ResizeSpec(cnn_settings.input_size, cnn_settings.input_size)
    inputs = prepare_inputs(dataset, methods, prnu_cfg, resize, on_decode_error)
    split = stratified_split(inputs.labels, ratio, seed, class_names=label_names)
    extraction = {"jpeg": {"block": 8, "dim": 126}, "prnu": prnu_cfg.to_dict()}

    reports: list[EvaluationReport] = []
    models = {}
    for m in methods:
        if m in inputs.errors:
            reports.append(EvaluationReport(m, list(label_names), seed, error=inputs.errors[m]))
            continue
        try:
            model, pred, extra = _evaluate_method(m, inputs, split, label_names, seed,
                                                  svm_settings, cnn_settings, extraction.get(m))
        except Exception as exc:  # isolate the failing method
            log.error("method %s failed: %s", m, exc)
            reports.append(EvaluationReport(m, list(label_names), seed, error=str(exc)))
            continue
        y_test = inputs.labels[list(split.test)]
        if dump_predictions:
            extra["predictions"] = [
                {"path": str(dataset.records[inputs.kept[i]].path), "true": label_names[t],
                 "pred": label_names[p]}
                for i, t, p in zip(split.test, y_test, pred)
            ]
        if m == "cnn":
            extra["loss_history"] = [list(h) for h in model.payload.loss_history]
        reports.append(EvaluationReport.from_predictions(m, label_names, seed, y_test, pred,
                                                         len(split.train), **extra))
        models[m] = model
    return BenchmarkResult(reports, split, models, inputs)


def settings_dict(svm_settings: SvmSettings, cnn_settings: CnnSettings) -> dict:
    c = asdict(cnn_settings)
    c["filters"] = list(c["filters"])
    return {"svm": asdict(svm_settings), "cnn": c}
