import os
from pathlib import Path

import numpy as np
import pytest

from radix_xbar.config import CircuitParams, RadixConfig


def make_quadrant_dataset(n: int = 200, seed: int = 0):
    """4 classes of 8x8 images: a bright 4x4 block in quadrant ``label``."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, n)
    images = rng.random((n, 8, 8)) * 0.1
    for i, label in enumerate(labels):
        r, c = divmod(int(label), 2)
        images[i, r * 4:(r + 1) * 4, c * 4:(c + 1) * 4] += 0.9
    return images, labels.astype(np.int64)


_SEGMENTS = {
    "a": (slice(1, 2), slice(2, 6)),
    "b": (slice(1, 4), slice(5, 6)),
    "c": (slice(3, 7), slice(5, 6)),
    "d": (slice(6, 7), slice(2, 6)),
    "e": (slice(3, 7), slice(2, 3)),
    "f": (slice(1, 4), slice(2, 3)),
    "g": (slice(3, 4), slice(2, 6)),
}
_DIGITS = ["abcdef", "bc", "abdeg", "abcdg", "bcfg", "acdfg", "acdefg", "abc", "abcdefg", "abcdfg"]


def make_glyph_dataset(n: int = 1000, seed: int = 0):
    """Seven-segment digits on an 8x8 canvas with jitter and background noise."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    images = rng.random((n, 8, 8)) * 0.2
    for i, label in enumerate(labels):
        glyph = np.zeros((8, 8))
        for segment in _DIGITS[label]:
            glyph[_SEGMENTS[segment]] = rng.uniform(0.7, 1.0)
        dr, dc = rng.integers(0, 2), rng.integers(-1, 2)
        images[i] += np.roll(glyph, (dr, dc), axis=(0, 1))
    return np.clip(images, 0.0, 1.0), labels.astype(np.int64)


@pytest.fixture
def radix5():
    return RadixConfig(x=5)


@pytest.fixture
def params():
    return CircuitParams()


@pytest.fixture
def quadrant_dataset():
    return make_quadrant_dataset()


@pytest.fixture
def digit_images():
    """Stroke-like 28x28 u8 images standing in for MNIST digits."""
    rng = np.random.default_rng(3)
    images = np.zeros((5, 28, 28), dtype=np.uint8)
    for img in images:
        r0, c0 = rng.integers(4, 12, 2)
        img[r0:r0 + 14, c0:c0 + 3] = 255
        img[r0:r0 + 3, c0:c0 + 10] = rng.integers(100, 256)
    return images


@pytest.fixture
def mnist_dir():
    path = os.environ.get("RADIX_XBAR_MNIST_DIR")
    if not path:
        pytest.skip("RADIX_XBAR_MNIST_DIR not set")
    return Path(path)


def mnist_file(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).exists():
            return directory / name
    pytest.skip(f"{stem} not found in {directory}")
