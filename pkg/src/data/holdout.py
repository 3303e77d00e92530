"""Class-holdout OOD construction."""
import logging
from typing import Dict, Iterable

import numpy as np

from src.data.schema import Dataset, Split
from src.errors import DatasetError

logger = logging.getLogger(__name__)


def relabel_map(num_classes: int, held: Iterable[int]) -> Dict[int, int]:
    """Order-preserving map from kept classes onto 0..K-1."""
    held = set(held)
    return {c: i for i, c in enumerate(c for c in range(num_classes) if c not in held)}


def holdout_ood(dataset: Dataset, held_classes: Iterable[int]) -> Dataset:
    """Remove ``held_classes`` from both splits and use their test samples as OOD.

    Kept classes are relabeled compactly in their original order.

    Raises:
        DatasetError: If held_classes is empty, contains unknown classes,
            leaves fewer than two classes, or the dataset is already standardized
    """
    held = sorted(set(int(c) for c in held_classes))
    if not held:
        raise DatasetError("holdout_ood needs at least one held-out class")
    unknown = [c for c in held if not 0 <= c < dataset.num_classes]
    if unknown:
        raise DatasetError(f"Held-out classes {unknown} outside [0, {dataset.num_classes})")
    if dataset.num_classes - len(held) < 2:
        raise DatasetError(f"Holding out {len(held)} of {dataset.num_classes} classes leaves fewer than two")
    if dataset.standardized:
        raise DatasetError("holdout_ood must run before standardization so held classes do not leak into the statistics")

    mapping = relabel_map(dataset.num_classes, held)
    lookup = np.full(dataset.num_classes, -1, dtype=np.int64)
    for old, new in mapping.items():
        lookup[old] = new

    def keep(split: Split) -> Split:
        mask = ~np.isin(split.y, held)
        return Split(x=split.x[mask], y=lookup[split.y[mask]])

    ood = dataset.test.x[np.isin(dataset.test.y, held)]
    if ood.shape[0] == 0:
        raise DatasetError(f"Test split has no samples of held-out classes {held}")
    logger.info(f"Held out classes {held}: {ood.shape[0]} OOD samples, {len(mapping)} classes remain")
    return Dataset(
        name=f"{dataset.name}-holdout",
        num_classes=len(mapping),
        train=keep(dataset.train),
        test=keep(dataset.test),
        ood=ood,
    )
