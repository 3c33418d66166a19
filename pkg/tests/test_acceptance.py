"""Acceptance criteria, one test per criterion.

Each test prints (and records for the terminal summary) a single
``criterion N: PASS|FAIL|SKIP`` line together with its measured values.
Run with ``pytest tests/test_acceptance.py -v``.
"""

import contextlib
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from camid.benchmark import CnnSettings, run_benchmark
from camid.cnn import (AdamState, CnnArchitecture, TrainConfig, adam_step, cross_entropy, one_hot, softmax,
                       train_cnn)
from camid.core import RasterImage
from camid.evaluate import stratified_split
from camid.ingest import scan_dataset
from camid.jpeg_features import dct2_8x8
from camid.prnu_features import PrnuConfig, local_moments, prnu_feature_vector, prnu_pattern, residual
from camid.report import build_report_document
from camid.svm import KernelSpec, train_binary_svm
from camid.synth import make_devices, write_dataset
from conftest import ACCEPTANCE_LINES
from gradcheck import reduced_problem, relative_errors


@contextlib.contextmanager
def criterion(number, title, limit_s=None):
    """Record PASS/FAIL for the enclosed checks, including the runtime limit."""
    info = {}
    t0 = time.perf_counter()
    status, why = "PASS", ""
    try:
        yield info
        elapsed = time.perf_counter() - t0
        info["runtime_s"] = round(elapsed, 2)
        if limit_s is not None:
            assert elapsed < limit_s, f"runtime {elapsed:.1f}s exceeds {limit_s}s"
    except pytest.skip.Exception as exc:
        status, why = "SKIP", str(exc)
        raise
    except BaseException as exc:
        status, why = "FAIL", f"{type(exc).__name__}: {exc}".splitlines()[0]
        raise
    finally:
        detail = ", ".join(f"{k}={v}" for k, v in info.items())
        line = f"criterion {number}: {status}  {title}" + (f"  [{detail}]" if detail else "") + (
            f"  ({why})" if why else "")
        ACCEPTANCE_LINES.append(line)
        print(line)


def naive_dct_batch(blocks):
    """Direct double-cosine sum over all (x, y) for every (u, v), no separability."""
    k = np.arange(8)
    a = np.where(k == 0, 1 / math.sqrt(2), 1.0)
    # basis[u, v, x, y] built as one 4-D tensor
    cu = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / 16)
    basis = (a[:, None, None, None] * a[None, :, None, None] / 4) * cu[:, None, :, None] * cu[None, :, None, :]
    out = np.zeros((len(blocks), 8, 8))
    for u in range(8):
        for v in range(8):
            out[:, u, v] = (blocks * basis[u, v]).sum(axis=(1, 2))
    return out


def test_criterion_1_dct_oracle():
    with criterion(1, "DCT matches direct sum, Parseval", limit_s=5) as info:
        blocks = np.random.default_rng(1).uniform(0, 255, (1000, 8, 8))
        fast = dct2_8x8(blocks)
        diff = float(np.abs(fast - naive_dct_batch(blocks)).max())
        energy = (blocks ** 2).sum(axis=(1, 2))
        parseval = float(np.max(np.abs((fast ** 2).sum(axis=(1, 2)) - energy) / energy))
        info.update(max_abs_diff=f"{diff:.2e}", parseval_rel=f"{parseval:.2e}")
        assert diff <= 1e-9
        assert parseval <= 1e-6


def test_criterion_2_prnu_identities():
    with criterion(2, "K + R_hat == R, constant image -> 0, gain in [0,1)", limit_s=10) as info:
        cfg = PrnuConfig(crop=64, stride=8)
        rng = np.random.default_rng(2)
        worst_gain = 0.0
        for _ in range(100):
            h, w = rng.integers(64, 97, 2)
            gray = rng.uniform(0, 1, (h, w)) * rng.uniform(0.01, 1) + rng.uniform(0, 0.5)
            k, r, r_hat = prnu_pattern(gray, cfg)
            assert np.array_equal(k + r_hat, r)
            var = local_moments(residual(gray, cfg), cfg).variance
            gain = var / (var + cfg.noise_floor)
            assert gain.min() >= 0 and gain.max() < 1
            worst_gain = max(worst_gain, float(gain.max()))
        const = prnu_feature_vector(RasterImage(np.full((512, 512), 77.0)))
        assert const.shape == (4096,) and not const.any()
        info.update(images=100, max_gain=f"{worst_gain:.6f}")


def test_criterion_3_cnn_gradient_check():
    with criterion(3, "CNN analytic vs finite-difference gradients", limit_s=60) as info:
        params, x, y = reduced_problem(1)
        errs, analytic = relative_errors(params, x, y, eps=1e-3)
        info["max_rel_err"] = f"{max(errs.values()):.2e}"
        assert all(np.any(g != 0) for g in analytic.values())
        assert all(e < 1e-4 for e in errs.values()), errs


def test_criterion_4_loss_and_optimizer_identities():
    with criterion(4, "cross-entropy ln 4, Adam first step, softmax rows") as info:
        ce = cross_entropy(np.full((5, 4), 0.25), one_hot([0, 1, 2, 3, 0], 4))
        assert abs(ce - math.log(4)) <= 1e-9
        g = np.array([0.3, -2.0, 1e-5, 7.5])
        params = {"w": np.zeros(4)}
        adam_step(params, {"w": g}, AdamState.zeros_like(params))
        step_err = float(np.abs(np.abs(params["w"]) - 1e-3 * np.abs(g) / (np.abs(g) + 1e-7)).max())
        assert step_err <= 1e-12
        z = np.random.default_rng(4).normal(0, 20, (1000, 4))
        row_err = float(np.abs(softmax(z).sum(axis=1) - 1).max())
        assert row_err <= 1e-12
        info.update(ce_err=f"{abs(ce - math.log(4)):.1e}", adam_err=f"{step_err:.1e}", softmax_err=f"{row_err:.1e}")


def test_criterion_5_svm_correctness():
    with criterion(5, "max-margin recovery, XOR via RBF, dual feasibility") as info:
        X = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]])
        y = np.array([1.0, 1.0, -1.0, -1.0])
        m = train_binary_svm(X, y, KernelSpec("linear"), C=1.0)
        assert abs(m.bias) < 0.1
        assert np.all(np.sign(m.decision_function(X)) == y)
        w = m.dual_coef @ m.support_vectors
        assert abs(w[1]) < 1e-6 and w[0] > 0
        Xx = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        yx = np.array([-1.0, -1.0, 1.0, 1.0])
        mx = train_binary_svm(Xx, yx, KernelSpec("rbf", 1.0), C=10.0)
        xor_acc = float(np.mean(np.sign(mx.decision_function(Xx)) == yx))
        assert xor_acc == 1.0
        worst = 0.0
        for mod, lab, C in ((m, y, 1.0), (mx, yx, 10.0)):
            assert np.all(mod.alpha >= 0) and np.all(mod.alpha <= C)
            worst = max(worst, abs(float(np.sum(mod.alpha * lab))))
        assert worst < 1e-6
        info.update(bias=f"{m.bias:.2e}", xor_acc=xor_acc, sum_alpha_y=f"{worst:.1e}")


def test_criterion_6_synthetic_end_to_end(tmp_path):
    with criterion(6, "synthetic devices: JPEG >= 0.9, PRNU >= 0.9, null 0.25 +- 0.15", limit_s=600) as info:
        accs = {}
        for key, mode, strength, method in (("jpeg", "quantization", 0.02, "jpeg"),
                                            ("prnu", "prnu", 0.02, "prnu"),
                                            ("null", "prnu", 0.0, "prnu")):
            root = tmp_path / key
            write_dataset(root, mode, make_devices(mode, 4, seed=42, strength=strength), 50, seed=42)
            res = run_benchmark(scan_dataset(root), [method], seed=42)
            (rep,) = res.reports
            assert rep.ok, rep.error
            accs[key] = rep.accuracy
        info.update({k: f"{v:.3f}" for k, v in accs.items()})
        assert accs["jpeg"] >= 0.9
        assert accs["prnu"] >= 0.9
        assert abs(accs["null"] - 0.25) <= 0.15


def test_criterion_7_determinism(tmp_path):
    with criterion(7, "split 7/3 per class, seeded splits, CNN trajectories, reports") as info:
        labels = np.repeat(np.arange(4), 10)
        s = stratified_split(labels, 0.7, 42)
        assert np.bincount(labels[list(s.train)]).tolist() == [7] * 4
        assert np.bincount(labels[list(s.test)]).tolist() == [3] * 4
        assert stratified_split(labels, 0.7, 42) == s

        arch = CnnArchitecture(input_size=18, filters=(4, 4, 4), hidden=8, n_classes=4)
        x = np.random.default_rng(7).uniform(0, 1, (12, 18, 18, 3))
        lab = np.arange(12) % 4
        traj = []
        for _ in range(2):
            steps = []
            train_cnn(x, lab, arch, seed=42, cfg=TrainConfig(epochs=2, batch_size=5),
                      on_step=lambda e, t, loss, p: steps.append({k: v.copy() for k, v in p.items()}))
            traj.append(steps)
        assert len(traj[0]) == len(traj[1]) == 6
        for a, b in zip(*traj):
            assert all(np.array_equal(a[k], b[k]) for k in a)

        root = tmp_path / "q"
        write_dataset(root, "quantization", make_devices("quantization", 4, seed=42), 10, size=(64, 64))
        ds = scan_dataset(root)
        small = CnnSettings(epochs=1, input_size=18, filters=(2, 2, 2), hidden=4)
        docs = []
        for _ in range(2):
            res = run_benchmark(ds, ["jpeg", "cnn"], seed=42, cnn_settings=small, dump_predictions=True)
            docs.append(json.dumps(build_report_document(res.reports, {"seed": 42}, res.split), indent=2))
        assert docs[0] == docs[1]
        info.update(cnn_steps=len(traj[0]), report_bytes=len(docs[0]))


def test_criterion_8_original_dataset_ranking():
    root = os.environ.get("CAMID_DATASET")
    with criterion(8, "original dataset: JPEG > PRNU > CNN (conditional)") as info:
        if not root or not Path(root).is_dir():
            pytest.skip("CAMID_DATASET not set; criterion 6 is the quantitative gate")
        res = run_benchmark(scan_dataset(root), ["jpeg", "prnu", "cnn"], seed=42)
        acc = {r.method: r.accuracy for r in res.reports}
        info.update({k: f"{v:.3f}" if v is not None else "failed" for k, v in acc.items()})
        assert all(r.ok for r in res.reports)
        assert acc["jpeg"] > acc["prnu"] > acc["cnn"]
