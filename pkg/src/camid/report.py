"""Report and feature-file writers plus terminal renderings."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .evaluate import EvaluationReport

REPORT_VERSION = 1


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_feature_csv(path, column_names, label_names, matrix, sidecar: dict) -> Path:
    """Write ``label,<features...>`` rows and a ``.json`` sidecar next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", *column_names])
        for name, row in zip(label_names, np.asarray(matrix)):
            w.writerow([name, *(repr(float(v)) for v in row)])
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def read_feature_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    labels = [r[0] for r in body]
    values = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), len(header) - 1)
    return header[1:], labels, values


def render_confusion(report: EvaluationReport, digits: int = 2) -> str:
    """Fixed-width confusion table: rows are true devices, columns predictions."""
    if report.confusion is None:
        return f"{report.method}: no confusion matrix ({report.error})"
    labels = report.labels
    w0 = max(len("true \\ pred"), *(len(n) for n in labels))
    cw = max(digits + 3, *(len(n) for n in labels))
    lines = [f"{report.method} (accuracy {report.accuracy:.{digits}f}, n_test={report.n_test})",
             "true \\ pred".ljust(w0) + "  " + "  ".join(n.rjust(cw) for n in labels)]
    for i, name in enumerate(labels):
        cells = "  ".join(f"{v:.{digits}f}".rjust(cw) for v in report.confusion[i])
        flag = "  (no test samples)" if name in report.empty_rows else ""
        lines.append(name.ljust(w0) + "  " + cells + flag)
    return "\n".join(lines)


def render_summary(reports, seed: int | None = None) -> str:
    lines = ["method  accuracy  n_test  status"]
    for r in reports:
        acc = f"{r.accuracy:.4f}" if r.accuracy is not None else "   -  "
        status = "ok" if r.ok else f"FAILED: {r.error}"
        lines.append(f"{r.method:<6}  {acc:>8}  {r.n_test:>6}  {status}")
    ok = [r for r in reports if r.ok]
    if len(ok) > 1:
        ranking = " > ".join(r.method for r in sorted(ok, key=lambda r: -r.accuracy))
        lines.append(f"ranking: {ranking}")
    if seed is not None:
        lines.append(f"split seed: {seed}")
    return "\n".join(lines)


def write_confusion_csv(path, report: EvaluationReport) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\pred", *report.labels])
        for name, row in zip(report.labels, report.confusion):
            w.writerow([name, *(repr(float(v)) for v in row)])
    return path


def build_report_document(reports, config: dict, split=None) -> dict:
    doc = {
        "version": REPORT_VERSION,
        "config": config,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "methods": [r.to_dict() for r in reports],
    }
    if split is not None:
        doc["split"] = {"ratio": split.ratio, "seed": split.seed,
                        "train": list(split.train), "test": list(split.test)}
    return doc


def write_reports(out_dir, reports, config: dict, split=None) -> dict[str, Path]:
    """Write report.json, accuracy.csv, confusion_<method>.csv and summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    doc = build_report_document(reports, config, split)
    p = out / "report.json"
    p.write_text(json.dumps(doc, indent=2))
    written["report"] = p
    written.update(write_tables(out, reports, config.get("seed")))
    return written


def write_tables(out_dir, reports, seed=None) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    acc = out / "accuracy.csv"
    with acc.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "accuracy", "n_test", "error"])
        for r in reports:
            w.writerow([r.method, "" if r.accuracy is None else repr(r.accuracy), r.n_test, r.error or ""])
    written["accuracy"] = acc
    for r in reports:
        if r.confusion is not None:
            written[f"confusion_{r.method}"] = write_confusion_csv(out / f"confusion_{r.method}.csv", r)
    text = render_summary(reports, seed) + "\n\n" + "\n\n".join(render_confusion(r) for r in reports) + "\n"
    s = out / "summary.txt"
    s.write_text(text)
    written["summary"] = s
    return written


def load_report_document(path) -> tuple[dict, list[EvaluationReport]]:
    doc = json.loads(Path(path).read_text())
    return doc, [EvaluationReport.from_dict(d) for d in doc["methods"]]
