"""
Row indicators for the order-parameter refined wells.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from peierls_lab.errors import LatticeError
from peierls_lab.lattice.domain_walls import DWDecomposition, dw_decompose
from peierls_lab.lattice.loops import DWLoop
from peierls_lab.lattice.torus import TorusLattice

logger = logging.getLogger(__name__)


@dataclass
class RowScan:
    row: int
    loops: List[DWLoop]
    total_length: int
    n_plus: int
    n_minus: int


def row_edges(lat: TorusLattice, y: int) -> set:
    """Horizontal edges between neighbours of row y."""
    return {lat.h_edge(x, y) for x in range(lat.Lx)}


def row_indicator_scan(lat: TorusLattice, z: np.ndarray, dec: Optional[DWDecomposition] = None) -> Optional[RowScan]:
    """
    First row holding at least Lx/3 spins of each sign, with the domain-wall
    loops that cross it and their total length; None if no row qualifies.
    """
    z = np.asarray(z)
    dec = dec or dw_decompose(lat, z)
    if dec.has_winding:
        raise LatticeError("row scan needs a configuration without winding domain walls")
    grid = z.reshape(lat.Ly, lat.Lx)
    third = lat.Lx / 3.0
    for y in range(lat.Ly):
        n_plus = int((grid[y] > 0).sum())
        n_minus = lat.Lx - n_plus
        if n_plus >= third and n_minus >= third:
            edges = row_edges(lat, y)
            crossing = [lp for lp in dec.loops if edges & lp.link_set]
            total = sum(lp.length for lp in crossing)
            logger.debug(f"Row {y} qualifies: {len(crossing)} loops, total length {total}")
            return RowScan(row=y, loops=crossing, total_length=total, n_plus=n_plus, n_minus=n_minus)
    return None
