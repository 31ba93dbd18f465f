"""MNIST IDX files, PGM output images and their rescaling metadata."""

import gzip
import json
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .errors import EmptyDataset, FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def read_idx(path: PathLike) -> np.ndarray:
    """Read an unsigned-byte IDX file (images or labels).

    Format (big endian): u32 magic, u32 count per dimension, u8 payload.
    """
    data = _read_bytes(path)
    if len(data) < 4:
        raise FormatError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_IMAGES_MAGIC:
        rank = 3
    elif magic == IDX_LABELS_MAGIC:
        rank = 1
    else:
        raise FormatError(f"{path}: magic number mismatch (0x{magic:08x})")
    header = 4 + 4 * rank
    if len(data) < header:
        raise FormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{rank}I", data[4:header])
    size = int(np.prod(dims))
    if len(data) - header != size:
        raise FormatError(f"{path}: expected {size} payload bytes, found {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims).copy()


def write_idx(path: PathLike, array: np.ndarray) -> None:
    """Write a u8 image stack ``(count, rows, cols)`` or label vector ``(count,)``."""
    array = np.asarray(array)
    if array.ndim == 3:
        magic = IDX_IMAGES_MAGIC
    elif array.ndim == 1:
        magic = IDX_LABELS_MAGIC
    else:
        raise FormatError(f"IDX writer expects rank 1 or 3, got {array.ndim}")
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    Path(path).write_bytes(header + array.astype(np.uint8).tobytes())


def load_mnist_subset(
    images_path: PathLike,
    labels_path: PathLike,
    count: Optional[int] = 1000,
) -> Tuple[np.ndarray, np.ndarray]:
    """First ``count`` images and labels from an IDX pair."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise FormatError("expected an image file and a label file")
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels")
    if count is not None:
        images, labels = images[:count], labels[:count]
    if len(images) == 0:
        raise EmptyDataset("dataset is empty")
    return images, labels.astype(np.int64)


def downsample_8x8(images: np.ndarray) -> np.ndarray:
    """28x28 digits to 8x8: crop a 2-pixel border, then 3x3 block means."""
    images = np.asarray(images, dtype=np.float64)
    if images.shape[-2:] != (28, 28):
        raise FormatError(f"expected 28x28 images, got {images.shape[-2:]}")
    cropped = images[..., 2:26, 2:26]
    blocks = cropped.reshape(*cropped.shape[:-2], 8, 3, 8, 3)
    return np.rint(blocks.mean(axis=(-3, -1))).astype(np.uint8)


def rescale_to_u8(values: np.ndarray) -> Tuple[np.ndarray, Dict[str, float]]:
    """Affine map of integer outputs onto 0..255.

    Returns:
        The 8-bit image and the ``min``, ``max`` and ``scale`` that produced it
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pixels = np.rint((values - lo) * scale).astype(np.uint8)
    return pixels, {"min": lo, "max": hi, "scale": scale}


def write_pgm(path: PathLike, pixels: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255)."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise FormatError(f"PGM needs a 2-D image, got shape {pixels.shape}")
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.astype(np.uint8).tobytes())


def read_pgm(path: PathLike) -> np.ndarray:
    """Read a P5 PGM with maxval 255, skipping comment lines."""
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(data[pos:end])
        pos = end
    magic, width, height, maxval = fields
    if magic != b"P5":
        raise FormatError(f"{path}: unsupported PGM magic {magic!r}")
    if int(maxval) != 255:
        raise FormatError(f"{path}: only maxval 255 is supported")
    w, h = int(width), int(height)
    payload = data[pos + 1:]
    if len(payload) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixel bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def write_output_image(path: PathLike, values: np.ndarray) -> Dict[str, float]:
    """Write decoded outputs as PGM plus a ``.json`` sidecar with the rescale."""
    path = Path(path)
    pixels, meta = rescale_to_u8(values)
    write_pgm(path, pixels)
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    return meta
