"""Stratified splitting, accuracy and row-normalized confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CamidError, SplitIndices

DEFAULT_SEED = 42
DEFAULT_RATIO = 0.7


class EvaluationError(CamidError):
    pass


def stratified_split(labels, ratio: float = DEFAULT_RATIO, seed: int = DEFAULT_SEED,
                     class_names=None) -> SplitIndices:
    """Per-class seeded shuffle; the first ``floor(ratio * n_c)`` go to train.

    Classes are visited in ascending id order with a single generator, so
    the split is a pure function of (labels, ratio, seed).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0 < ratio < 1:
        raise EvaluationError(f"split ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            name = class_names[c] if class_names is not None else f"class {c}"
            raise EvaluationError(f"{name} has {len(idx)} sample(s); at least 2 are needed to split")
        idx = idx[rng.permutation(len(idx))]
        # guard against 0.7 * 10 landing just under 7 in binary floating point
        k = int(np.floor(ratio * len(idx) + 1e-9))
        train.extend(int(i) for i in idx[:k])
        test.extend(int(i) for i in idx[k:])
    return SplitIndices(tuple(sorted(train)), tuple(sorted(test)), seed, ratio)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise EvaluationError("label arrays differ in length")
    if y_true.size == 0:
        raise EvaluationError("accuracy of an empty set is undefined")
    return float(np.mean(y_true == y_pred))


def confusion_counts(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise EvaluationError(f"label outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return counts


def normalize_rows(counts) -> tuple[np.ndarray, np.ndarray]:
    """Return (row-normalized matrix, mask of rows that had no samples)."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=1)
    empty = totals == 0
    out = np.zeros_like(counts)
    out[~empty] = counts[~empty] / totals[~empty, None]
    return out, empty


def confusion_matrix_normalized(y_true, y_pred, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    return normalize_rows(confusion_counts(y_true, y_pred, n_classes))


@dataclass
class EvaluationReport:
    method: str
    labels: list[str]
    seed: int
    accuracy: float | None = None
    confusion: np.ndarray | None = None
    counts: np.ndarray | None = None
    empty_rows: list[str] = field(default_factory=list)
    test_counts: dict = field(default_factory=dict)
    n_train: int = 0
    n_test: int = 0
    error: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    @classmethod
    def from_predictions(cls, method, labels, seed, y_true, y_pred, n_train, **extra):
        k = len(labels)
        counts = confusion_counts(y_true, y_pred, k)
        matrix, empty = normalize_rows(counts)
        return cls(
            method=method,
            labels=list(labels),
            seed=seed,
            accuracy=accuracy(y_true, y_pred),
            confusion=matrix,
            counts=counts,
            empty_rows=[labels[i] for i in np.flatnonzero(empty)],
            test_counts={labels[i]: int(counts[i].sum()) for i in range(k)},
            n_train=n_train,
            n_test=int(len(y_true)),
            extra=extra,
        )

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "labels": self.labels,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "test_counts": self.test_counts,
            "empty_rows": self.empty_rows,
            "error": self.error,
        }
        if self.confusion is not None:
            d["confusion"] = self.confusion.tolist()
            d["confusion_counts"] = self.counts.tolist()
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        known = {"method", "labels", "seed", "accuracy", "n_train", "n_test", "test_counts",
                 "empty_rows", "error", "confusion", "confusion_counts"}
        return cls(
            method=d["method"],
            labels=list(d["labels"]),
            seed=d["seed"],
            accuracy=d.get("accuracy"),
            confusion=np.array(d["confusion"]) if d.get("confusion") is not None else None,
            counts=np.array(d["confusion_counts"]) if d.get("confusion_counts") is not None else None,
            empty_rows=list(d.get("empty_rows", [])),
            test_counts=dict(d.get("test_counts", {})),
            n_train=d.get("n_train", 0),
            n_test=d.get("n_test", 0),
            error=d.get("error"),
            extra={k: v for k, v in d.items() if k not in known},
        )
