"""
Spin configurations and their basis indices.

Bit i of a basis index is site i; bit value 0 is spin +1, so the all-plus
configuration is index 0.
"""

from typing import Iterable, Union

import numpy as np

MAX_TABLE_SITES = 24


def spins_from_index(index: int, n_sites: int) -> np.ndarray:
    bits = (int(index) >> np.arange(n_sites)) & 1
    return (1 - 2 * bits).astype(np.int8)


def index_from_spins(z: Iterable[int]) -> int:
    z = np.asarray(list(z))
    bits = (z < 0).astype(np.int64)
    return int((bits << np.arange(len(bits))).sum())


def spin_columns(indices: Union[np.ndarray, int], n_sites: int) -> np.ndarray:
    """(len(indices), n_sites) int8 spins for a batch of basis indices."""
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    bits = (idx[:, None] >> np.arange(n_sites)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def site_bits(n_sites: int) -> np.ndarray:
    """(n_sites, 2**n_sites) bool table: bit of each site in each basis state."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    return ((idx[None, :] >> np.arange(n_sites)[:, None]) & 1).astype(bool)


def flip_all(index: int, n_sites: int) -> int:
    return int(index) ^ ((1 << n_sites) - 1)
