from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_png(path: Path, pixels) -> Path:
    px = np.asarray(pixels)
    if px.ndim == 2:
        px = np.repeat(px[:, :, None], 3, axis=2)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(px.astype(np.uint8)).save(path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Two devices, a/ with 2 images and b/ with 3."""
    root = tmp_path / "data"
    r = np.random.default_rng(0)
    for name, n in (("a", 2), ("b", 3)):
        for i in range(n):
            write_png(root / name / f"{i}.png", r.integers(0, 256, (16, 24, 3)))
    return root


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
