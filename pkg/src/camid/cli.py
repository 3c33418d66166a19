"""``camid`` command line: scan, extract, train, benchmark, synth, report.

Exit codes: 0 success, 1 partial failure (some method failed), 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (METHODS, CnnSettings, SvmSettings, fit_method, prepare_inputs,
                        run_benchmark, settings_dict)
from .core import CamidError
from .evaluate import DEFAULT_RATIO, DEFAULT_SEED, stratified_split
from .ingest import ResizeSpec, scan_dataset
from .jpeg_features import FEATURE_DIM
from .jpeg_features import feature_names as jpeg_names
from .persist import save_model
from .prnu_features import PrnuConfig
from .prnu_features import feature_names as prnu_names
from .report import config_hash, load_report_document, write_feature_csv, write_reports, write_tables
from .synth import make_devices, write_dataset

log = logging.getLogger("camid")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(CamidError):
    pass


@dataclass
class RunConfig:
    """Every knob of a run. Config files use these names as flat keys."""

    data: str = "data"
    out: str = "out"
    methods: str = "jpeg,prnu,cnn"
    ratio: float = DEFAULT_RATIO
    seed: int = DEFAULT_SEED
    on_decode_error: str = "abort"
    dump_predictions: bool = False
    prnu_sigma_residual: float = 1.0
    prnu_sigma_window: float = 2.0
    prnu_noise_floor: float = 0.01
    prnu_crop: int = 512
    prnu_stride: int = 8
    svm_C: float = 1.0
    svm_gamma: float | None = None
    svm_tol: float = 1e-3
    svm_max_iter: int = 100_000
    cnn_epochs: int = 5
    cnn_batch_size: int = 8
    cnn_lr: float = 1e-3
    cnn_beta1: float = 0.9
    cnn_beta2: float = 0.999
    cnn_eps: float = 1e-7
    cnn_input_size: int = 128

    def method_list(self) -> tuple[str, ...]:
        return parse_methods(self.methods)

    def prnu(self) -> PrnuConfig:
        return PrnuConfig(self.prnu_sigma_residual, self.prnu_sigma_window, self.prnu_noise_floor,
                          self.prnu_crop, self.prnu_stride)

    def svm(self) -> SvmSettings:
        return SvmSettings(self.svm_C, self.svm_gamma, self.svm_tol, self.svm_max_iter)

    def cnn(self) -> CnnSettings:
        return CnnSettings(self.cnn_epochs, self.cnn_batch_size, self.cnn_lr, self.cnn_beta1,
                           self.cnn_beta2, self.cnn_eps, self.cnn_input_size)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.method_list())
        return d


CONFIG_KEYS = {f.name: f for f in fields(RunConfig)}


def parse_methods(text) -> tuple[str, ...]:
    items = [m.strip() for m in str(text).split(",") if m.strip()]
    bad = [m for m in items if m not in METHODS]
    if bad or not items:
        raise UsageError(f"unknown method(s): {', '.join(bad) or '(none)'}; choose from {', '.join(METHODS)}")
    return tuple(dict.fromkeys(items))


def _methods_arg(text):
    try:
        parse_methods(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def load_config_file(path) -> dict:
    """Flat JSON object of RunConfig keys."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a flat JSON object")
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {', '.join(unknown)}")
    nested = [k for k, v in doc.items() if isinstance(v, (dict, list))]
    if nested:
        raise UsageError(f"config keys must map to scalars: {', '.join(nested)}")
    return doc


def effective_config(args) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = asdict(RunConfig())
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "method", None):
        values["methods"] = args.method
    cfg = RunConfig(**values)
    cfg.method_list()
    if cfg.on_decode_error not in ("skip", "abort"):
        raise UsageError("on_decode_error must be 'skip' or 'abort'")
    return cfg


# -- subcommands ------------------------------------------------------------

def _scan(cfg: RunConfig):
    root = Path(cfg.data)
    if not root.is_dir():
        raise UsageError(f"dataset directory not found: {root}")
    return scan_dataset(root)


def cmd_scan(args) -> int:
    cfg = effective_config(args)
    ds = _scan(cfg)
    counts = ds.counts()
    for lab in ds.labels:
        print(f"{lab.index}  {lab.name:<20} {counts[lab.name]:>5} images")
    print(f"total {len(ds.records)} images, {len(ds.labels)} devices, {len(ds.skipped)} skipped files")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"root": str(Path(cfg.data)), "labels": ds.label_names, "counts": counts,
               "records": [{"path": str(r.path), "label": r.label.name} for r in ds.records],
               "skipped": [str(p) for p in ds.skipped]}
        (out / "scan.json").write_text(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = effective_config(args)
    methods = cfg.method_list()
    if "cnn" in methods:
        raise UsageError("extract supports the feature methods jpeg and prnu")
    ds = _scan(cfg)
    prnu_cfg = cfg.prnu()
    inputs = prepare_inputs(ds, methods, prnu_cfg, on_decode_error=cfg.on_decode_error)
    out = Path(cfg.out)
    status = EXIT_OK
    for m in methods:
        if m in inputs.errors:
            print(f"{m}: extraction failed: {inputs.errors[m]}", file=sys.stderr)
            status = EXIT_PARTIAL
            continue
        names = jpeg_names() if m == "jpeg" else prnu_names(prnu_cfg)
        params = ({"block": 8, "dim": FEATURE_DIM, "ac_order": "raster", "level_shift": 0}
                  if m == "jpeg" else prnu_cfg.to_dict())
        sidecar = {"method": m, "parameters": params, "config": cfg.to_dict(),
                   "config_hash": config_hash(cfg.to_dict()),
                   "files": [str(ds.records[i].path) for i in inputs.kept]}
        labels = [ds.labels[i].name for i in inputs.labels]
        path = write_feature_csv(out / f"{m}_features.csv", names, labels, inputs.arrays[m], sidecar)
        print(f"{m}: {len(labels)} rows x {len(names)} features -> {path}")
    if len(methods) > len(inputs.errors) and inputs.decode_failures:
        print(f"skipped {len(inputs.decode_failures)} undecodable files", file=sys.stderr)
    return status


def cmd_train(args) -> int:
    cfg = effective_config(args)
    methods = cfg.method_list()
    ds = _scan(cfg)
    cnn_settings = cfg.cnn()
    inputs = prepare_inputs(ds, methods, cfg.prnu(), ResizeSpec(cnn_settings.input_size, cnn_settings.input_size),
                            cfg.on_decode_error)
    if args.split == "train":
        rows = np.asarray(stratified_split(inputs.labels, cfg.ratio, cfg.seed, ds.label_names).train)
    else:
        rows = np.arange(len(inputs.labels))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for m in methods:
        if m in inputs.errors:
            print(f"{m}: failed: {inputs.errors[m]}", file=sys.stderr)
            status = EXIT_PARTIAL
            continue
        try:
            model = fit_method(m, inputs.arrays[m][rows], inputs.labels[rows], ds.label_names,
                               cfg.svm(), cnn_settings, cfg.seed,
                               cfg.prnu().to_dict() if m == "prnu" else {"block": 8, "dim": FEATURE_DIM})
        except Exception as exc:  # one failing method must not stop the others
            print(f"{m}: failed: {exc}", file=sys.stderr)
            status = EXIT_PARTIAL
            continue
        path = save_model(model, out / f"model_{m}.json")
        print(f"{m}: trained on {len(rows)} images -> {path}")
        if m == "cnn":
            hist = out / "loss_history_cnn.csv"
            hist.write_text("epoch,step,loss\n" + "".join(
                f"{e},{s},{loss!r}\n" for e, s, loss in model.payload.loss_history))
    return status


def cmd_benchmark(args) -> int:
    cfg = effective_config(args)
    ds = _scan(cfg)
    result = run_benchmark(ds, cfg.method_list(), cfg.seed, cfg.ratio, cfg.prnu(), cfg.svm(), cfg.cnn(),
                           cfg.on_decode_error, cfg.dump_predictions)
    config = cfg.to_dict()
    config["settings"] = settings_dict(cfg.svm(), cfg.cnn())
    config["prnu"] = cfg.prnu().to_dict()
    written = write_reports(cfg.out, result.reports, config, result.split)
    print((Path(written["summary"])).read_text(), end="")
    for r in result.reports:
        if "loss_history" in r.extra:
            (Path(cfg.out) / f"loss_history_{r.method}.csv").write_text("epoch,step,loss\n" + "".join(
                f"{e},{s},{loss!r}\n" for e, s, loss in r.extra["loss_history"]))
    return EXIT_PARTIAL if result.any_failed else EXIT_OK


def cmd_synth(args) -> int:
    devices = make_devices(args.mode, args.devices, args.seed, args.strength)
    size = (args.size, args.size) if args.size else None
    try:
        out = write_dataset(args.out, args.mode, devices, args.per_device, size, args.noise, args.seed)
    except OSError as exc:
        raise UsageError(f"cannot write synthetic dataset to {args.out}: {exc}") from exc
    print(f"wrote {len(devices) * args.per_device} images for {len(devices)} devices to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"report file not found: {path}")
    doc, reports = load_report_document(path)
    out = Path(args.out) if args.out else path.parent
    written = write_tables(out, reports, doc.get("seed"))
    print(written["summary"].read_text(), end="")
    return EXIT_PARTIAL if any(not r.ok for r in reports) else EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_run_flags(p, method_flag: str):
    p.add_argument("--data", help="dataset root laid out as <root>/<device>/<image>")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="flat JSON config file; flags override it")
    p.add_argument("--seed", type=int, help=f"split/training seed (default {DEFAULT_SEED})")
    p.add_argument("--ratio", type=float, help=f"train fraction per class (default {DEFAULT_RATIO})")
    p.add_argument("--on-decode-error", dest="on_decode_error", choices=("skip", "abort"))
    if method_flag == "method":
        p.add_argument("--method", type=_methods_arg, help="jpeg, prnu or cnn (comma list allowed)")
    else:
        p.add_argument("--methods", type=_methods_arg, help="comma list from jpeg,prnu,cnn")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camid", description="Source camera identification toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="list devices and image counts")
    p.add_argument("--data")
    p.add_argument("--out", help="optional directory for scan.json")
    p.add_argument("--config")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("extract", help="write JPEG/PRNU feature CSVs")
    _add_run_flags(p, "method")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train and save models")
    _add_run_flags(p, "method")
    p.add_argument("--split", choices=("train", "all"), default="train",
                   help="fit on the stratified train split (default) or on every image")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="evaluate methods on one shared split")
    _add_run_flags(p, "methods")
    p.add_argument("--dump-predictions", dest="dump_predictions", action="store_const", const=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="generate a synthetic-device dataset")
    p.add_argument("--mode", choices=("quantization", "prnu"), required=True)
    p.add_argument("--devices", type=int, default=4)
    p.add_argument("--per-device", dest="per_device", type=int, default=50)
    p.add_argument("--strength", type=float, default=0.02, help="PRNU pattern strength")
    p.add_argument("--noise", type=float, default=1.5, help="read-noise std in gray levels (prnu mode)")
    p.add_argument("--size", type=int, help="square image side (default 256 quantization, 512 prnu)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render tables from a report.json")
    p.add_argument("--input", required=True, help="path to report.json")
    p.add_argument("--out", help="output directory (default: next to the input)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"camid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CamidError as exc:
        print(f"camid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
