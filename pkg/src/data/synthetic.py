"""Two-dimensional synthetic datasets with an out-of-distribution set.

Generators return raw features; call ``Dataset.standardize()`` to apply
train-split statistics.
"""
import csv
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.constants import DEFAULT_TEST_FRACTION, OOD_RING_FACTOR
from src.data.schema import Dataset, Split
from src.errors import DatasetError
from src.utils.seeding import make_rng

logger = logging.getLogger(__name__)

BLOB_CENTER_RADIUS = 4.0


def _class_sizes(n: int, k: int) -> List[int]:
    return [n // k + (1 if c < n % k else 0) for c in range(k)]


def _split(x: np.ndarray, y: np.ndarray, rng: np.random.Generator, test_fraction: float) -> Tuple[Split, Split]:
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    order = rng.permutation(x.shape[0])
    n_test = max(1, int(round(x.shape[0] * test_fraction)))
    test, train = order[:n_test], order[n_test:]
    return Split(x=x[train], y=y[train]), Split(x=x[test], y=y[test])


def ring(center: np.ndarray, radius: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` points at uniformly random angles on a circle."""
    angles = rng.uniform(0.0, 2.0 * np.pi, m)
    return center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def gen_two_moons(
    n: int,
    noise_std: float,
    seed: int,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    n_ood: Optional[int] = None,
) -> Dataset:
    """Two interleaving half-circles.

    Class 0 lies on (cos t, sin t), class 1 on (1 - cos t, 0.5 - sin t) with
    t ~ U(0, pi), plus isotropic Gaussian noise. The OOD set lies on a ring of
    radius 3x the data radius around the data center.

    Args:
        n: Total number of in-distribution points (>= 4)
        noise_std: Standard deviation of the additive noise (>= 0)
        seed: Seed of every draw
        test_fraction: Share of the points held out as test split
        n_ood: OOD points (defaults to the test-split size)
    """
    if n < 4:
        raise DatasetError(f"two_moons needs n >= 4, got {n}")
    if noise_std < 0:
        raise DatasetError(f"noise_std must be non-negative, got {noise_std}")
    rng = make_rng(seed)
    n0, n1 = _class_sizes(n, 2)
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    upper = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    lower = np.stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)], axis=1)
    x = np.concatenate([upper, lower])
    if noise_std > 0:
        x = x + rng.normal(0.0, noise_std, x.shape)
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])

    train, test = _split(x, y, rng, test_fraction)
    center = x.mean(axis=0)
    radius = float(np.max(np.linalg.norm(x - center, axis=1)))
    ood = ring(center, OOD_RING_FACTOR * radius, n_ood if n_ood is not None else test.n, rng)
    logger.debug(f"two_moons: {train.n} train, {test.n} test, {ood.shape[0]} OOD (ring radius {OOD_RING_FACTOR * radius:.3f})")
    return Dataset(name="two_moons", num_classes=2, train=train, test=test, ood=ood)


def gen_blobs(
    k: int,
    n: int,
    spread: float,
    seed: int,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    n_ood: Optional[int] = None,
) -> Dataset:
    """``k`` isotropic Gaussian blobs with centers evenly spaced on a circle.

    The OOD set is a (k+1)-th blob of the same spread, centered 3x the
    center-circle radius away from the origin.
    """
    if k < 2:
        raise DatasetError(f"blobs needs k >= 2, got {k}")
    if n < max(4, k):
        raise DatasetError(f"blobs needs n >= max(4, k), got n={n}, k={k}")
    if spread < 0:
        raise DatasetError(f"spread must be non-negative, got {spread}")
    rng = make_rng(seed)
    angles = 2.0 * np.pi * np.arange(k) / k
    centers = BLOB_CENTER_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    sizes = _class_sizes(n, k)
    x = np.concatenate([centers[c] + rng.normal(0.0, spread, (size, 2)) for c, size in enumerate(sizes)])
    y = np.concatenate([np.full(size, c, dtype=np.int64) for c, size in enumerate(sizes)])

    train, test = _split(x, y, rng, test_fraction)
    far = OOD_RING_FACTOR * BLOB_CENTER_RADIUS * np.array([np.cos(np.pi / k), np.sin(np.pi / k)])
    m = n_ood if n_ood is not None else test.n
    ood = far + rng.normal(0.0, spread, (m, 2))
    return Dataset(name="blobs", num_classes=k, train=train, test=test, ood=ood)


def _write_rows(path: Path, x: np.ndarray, y: Optional[np.ndarray]) -> None:
    fieldnames = [f"x{j}" for j in range(x.shape[1])] + (["label"] if y is not None else [])
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for i, row in enumerate(x):
            record = {f"x{j}": repr(float(v)) for j, v in enumerate(row)}
            if y is not None:
                record["label"] = int(y[i])
            writer.writerow(record)


def export_csv(dataset: Dataset, directory: Union[str, Path]) -> List[Path]:
    """Write ``train.csv``, ``test.csv`` and (when present) ``ood.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, x, y in (("train", dataset.train.x, dataset.train.y), ("test", dataset.test.x, dataset.test.y)):
        _write_rows(directory / f"{name}.csv", x, y)
        written.append(directory / f"{name}.csv")
    if dataset.ood is not None:
        _write_rows(directory / "ood.csv", dataset.ood, None)
        written.append(directory / "ood.csv")
    logger.info(f"Exported {dataset.name} to {directory}")
    return written
