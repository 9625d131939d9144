"""
Flat binary state files: a little-endian int64 header (N, sector) followed
by 2**N little-endian float64 amplitudes in basis-index order.
"""

import logging
from typing import Tuple

import numpy as np

from peierls_lab.errors import StructureError

logger = logging.getLogger(__name__)

HEADER = np.dtype('<i8')
BODY = np.dtype('<f8')


def save_state(path: str, psi: np.ndarray, n_sites: int, sector: int = 0):
    psi = np.asarray(psi)
    if np.iscomplexobj(psi):
        if np.abs(psi.imag).max() > 1e-12:
            raise StructureError("state file holds real amplitudes only")
        psi = psi.real
    if psi.shape != (1 << n_sites,):
        raise StructureError(f"state of shape {psi.shape} does not match {n_sites} sites")
    with open(path, 'wb') as f:
        f.write(np.array([n_sites, sector], dtype=HEADER).tobytes())
        f.write(psi.astype(BODY).tobytes())
    logger.debug(f"Saved {n_sites}-site state (sector {sector}) to {path}")


def load_state(path: str) -> Tuple[np.ndarray, int, int]:
    """(psi, n_sites, sector)."""
    with open(path, 'rb') as f:
        header = np.frombuffer(f.read(2 * HEADER.itemsize), dtype=HEADER)
        if header.size != 2:
            raise StructureError(f"{path}: truncated header")
        n_sites, sector = int(header[0]), int(header[1])
        body = np.frombuffer(f.read(), dtype=BODY)
    if body.size != 1 << n_sites:
        raise StructureError(f"{path}: expected {1 << n_sites} amplitudes, found {body.size}")
    return body.astype(np.float64), n_sites, sector
