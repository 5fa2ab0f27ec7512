"""Reader and writer for the IDX files MNIST ships in."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
_UBYTE = 0x08


def _open(path: Path):
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path, expect_magic: int | None = None) -> np.ndarray:
    """Read an unsigned-byte IDX file (big-endian header) into a uint8 array."""
    path = Path(path)
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise InvalidInputError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if expect_magic is not None and magic != expect_magic:
        raise InvalidInputError(f"{path}: magic {magic}, expected {expect_magic}")
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != _UBYTE:
        raise InvalidInputError(f"{path}: unsupported IDX magic {magic:#010x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise InvalidInputError(f"{path}: truncated IDX header")
    shape = struct.unpack(f">{ndim}I", raw[4:header])
    data = np.frombuffer(raw, dtype=np.uint8, offset=header)
    if data.size != int(np.prod(shape)):
        raise InvalidInputError(f"{path}: {data.size} bytes of data for shape {shape}")
    return data.reshape(shape)


def write_idx(path, array) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = (_UBYTE << 8) | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        fh.write(array.tobytes())


def load_mnist_split(directory, split: str = "train"):
    """Return ``(features, labels)`` with features flattened and scaled to [0, 1]."""
    directory = Path(directory)
    prefix = "train" if split == "train" else "t10k"

    def find(stem):
        for name in (stem, stem + ".gz"):
            if (directory / name).exists():
                return directory / name
        raise InvalidInputError(f"missing {stem} in {directory}")

    images = read_idx(find(f"{prefix}-images-idx3-ubyte"), IMAGES_MAGIC)
    labels = read_idx(find(f"{prefix}-labels-idx1-ubyte"), LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise InvalidInputError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images.reshape(images.shape[0], -1).astype(np.float64) / 255.0, labels.astype(np.int64)
