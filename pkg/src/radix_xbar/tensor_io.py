"""RXT1 tensor codec.

Layout (little-endian)::

    b"RXT1" | u8 dtype (0 = f64, 1 = i32) | u8 rank | rank x u32 dims | payload

The payload is row-major. Encoding then decoding is bit-exact.
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import FormatError

MAGIC = b"RXT1"
DTYPE_F64 = 0
DTYPE_I32 = 1

_DTYPES = {
    DTYPE_F64: np.dtype("<f8"),
    DTYPE_I32: np.dtype("<i4"),
}

PathLike = Union[str, Path]


def _dtype_tag(array: np.ndarray) -> int:
    if np.issubdtype(array.dtype, np.floating):
        return DTYPE_F64
    if np.issubdtype(array.dtype, np.integer) or array.dtype == np.bool_:
        return DTYPE_I32
    raise FormatError(f"cannot encode dtype {array.dtype}")


def encode_tensor(array: np.ndarray) -> bytes:
    """Serialize an array as an RXT1 blob."""
    array = np.asarray(array)
    if array.ndim > 255:
        raise FormatError(f"rank {array.ndim} does not fit in a u8")
    tag = _dtype_tag(array)
    if tag == DTYPE_I32 and array.size:
        info = np.iinfo(np.int32)
        if array.min() < info.min or array.max() > info.max:
            raise FormatError("integer tensor does not fit in i32")
    header = MAGIC + struct.pack("<BB", tag, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    payload = np.ascontiguousarray(array, dtype=_DTYPES[tag]).tobytes()
    return header + payload


def decode_tensor(data: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Parse one RXT1 blob starting at ``offset``.

    Returns:
        The decoded array and the offset just past its payload.
    """
    if data[offset:offset + 4] != MAGIC:
        raise FormatError(f"bad tensor magic {data[offset:offset + 4]!r}")
    offset += 4
    if len(data) < offset + 2:
        raise FormatError("truncated tensor header")
    tag, rank = struct.unpack_from("<BB", data, offset)
    offset += 2
    if tag not in _DTYPES:
        raise FormatError(f"unknown dtype tag {tag}")
    if len(data) < offset + 4 * rank:
        raise FormatError("truncated tensor dims")
    shape = struct.unpack_from(f"<{rank}I", data, offset)
    offset += 4 * rank
    dtype = _DTYPES[tag]
    nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(data) < offset + nbytes:
        raise FormatError(f"truncated payload: need {nbytes} bytes")
    array = np.frombuffer(data, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset)
    # native dtype copy so callers get a writable array
    native = np.float64 if tag == DTYPE_F64 else np.int32
    return array.reshape(shape).astype(native), offset + nbytes


def write_tensor(path: PathLike, array: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(array))


def read_tensor(path: PathLike, expect: str = "any") -> np.ndarray:
    """Read an RXT1 file.

    Args:
        path: File to read
        expect: "f64", "i32" or "any"

    Returns:
        The decoded array
    """
    data = Path(path).read_bytes()
    array, end = decode_tensor(data)
    if end != len(data):
        raise FormatError(f"{len(data) - end} trailing bytes after tensor in {path}")
    if expect == "f64" and array.dtype != np.float64:
        raise FormatError(f"{path}: expected an f64 tensor, got {array.dtype}")
    if expect == "i32" and array.dtype != np.int32:
        raise FormatError(f"{path}: expected an i32 tensor, got {array.dtype}")
    return array
