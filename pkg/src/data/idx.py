"""Reader and writer for the IDX format used by MNIST-style files.

An IDX file is a big-endian u32 magic ``0x000008NN`` (unsigned bytes, NN
dimensions), NN big-endian u32 extents, then the row-major payload.
"""
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.constants import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC
from src.data.schema import Dataset, Split
from src.errors import IdxFormatError, IdxMismatchError, IdxTruncatedError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_idx(path: PathLike, expected_magic: int) -> np.ndarray:
    """Parse one IDX file into a uint8 array of its declared shape.

    Raises:
        IdxFormatError: Wrong magic number or trailing bytes
        IdxTruncatedError: File shorter than its header announces
    """
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX magic number")
    (magic,) = struct.unpack_from(">I", data)
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(data) < header_size:
        raise IdxTruncatedError(f"{path}: truncated inside the dimension header")
    shape = struct.unpack_from(f">{ndim}I", data, 4)
    expected = header_size + int(np.prod(shape))
    if len(data) < expected:
        raise IdxTruncatedError(f"{path}: {len(data)} bytes, header announces {expected}")
    if len(data) > expected:
        raise IdxFormatError(f"{path}: {len(data) - expected} bytes beyond the declared payload")
    return np.frombuffer(data, dtype=">u1", count=expected - header_size, offset=header_size).reshape(shape).astype(np.uint8)


def write_idx(path: PathLike, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (labels for 1-D input, images otherwise)."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        if array.size and (array.min() < 0 or array.max() > 255 or not np.all(np.mod(array, 1) == 0)):
            raise IdxFormatError("IDX payload must be integers in [0, 255]")
        array = array.astype(np.uint8)
    magic = 0x00000800 | array.ndim
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(header + array.astype(">u1").tobytes())


def load_idx(images_path: PathLike, labels_path: PathLike) -> Split:
    """Load an image/label file pair as a split with features scaled to [0, 1].

    Images of shape (n, rows, cols) become feature rows of length rows*cols.

    Raises:
        IdxFormatError: Bad magic number
        IdxTruncatedError: Truncated file
        IdxMismatchError: Image and label counts differ
    """
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    logger.debug(f"Loaded {features.shape[0]} IDX samples of width {features.shape[1]} from {images_path}")
    return Split(x=features, y=labels.astype(np.int64))


def load_idx_dataset(
    train_images: PathLike,
    train_labels: PathLike,
    test_images: PathLike,
    test_labels: PathLike,
    num_classes: Optional[int] = None,
    standardize: bool = True,
    name: str = "idx",
) -> Dataset:
    """Train and test IDX pairs as a Dataset, standardized with train stats by default.

    ``num_classes`` defaults to one more than the largest label seen.
    Pass ``standardize=False`` when a class holdout comes next.
    """
    train = load_idx(train_images, train_labels)
    test = load_idx(test_images, test_labels)
    classes = num_classes or int(max(train.y.max(initial=0), test.y.max(initial=0))) + 1
    dataset = Dataset(name=name, num_classes=max(classes, 2), train=train, test=test)
    return dataset.standardize() if standardize else dataset
