"""Desk-scale datasets: synthetic generators, IDX files and class holdout."""

from src.data.schema import Dataset, Split
from src.data.synthetic import export_csv, gen_blobs, gen_two_moons
from src.data.idx import load_idx, load_idx_dataset, read_idx, write_idx
from src.data.holdout import holdout_ood, relabel_map

__all__ = [
    'Dataset',
    'Split',
    'export_csv',
    'gen_blobs',
    'gen_two_moons',
    'holdout_ood',
    'load_idx',
    'load_idx_dataset',
    'read_idx',
    'relabel_map',
    'write_idx',
]
