"""
Periodic square-lattice geometry.

Spins live on sites, domain-wall links on the dual edges (one per primal
edge). Site (x, y) has index x + Lx*y. Horizontal edge h(x, y) joins
(x, y)-(x+1, y) and has index x + Lx*y; vertical edge v(x, y) joins
(x, y)-(x, y+1) and has index offset + x + Lx*y, where offset is the number
of horizontal edges. Plaquette p(x, y) has corners (x, y), (x+1, y),
(x, y+1), (x+1, y+1); north is +y.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple

import numpy as np

from peierls_lab.errors import LatticeError

logger = logging.getLogger(__name__)

# side slots of a plaquette
NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
SIDE_NAMES = ('N', 'E', 'S', 'W')
# unit steps on the dual lattice when leaving a plaquette through a side
SIDE_STEPS = ((0, 1), (1, 0), (0, -1), (-1, 0))
OPPOSITE = (SOUTH, WEST, NORTH, EAST)


@dataclass(frozen=True)
class TorusLattice:
    Lx: int
    Ly: int

    def __post_init__(self):
        if self.Lx < 1 or self.Ly < 1:
            raise LatticeError(f"lattice sides must be positive, got {self.Lx}x{self.Ly}")

    @property
    def L0(self) -> int:
        return self.Lx

    @property
    def is_square(self) -> bool:
        return self.Lx == self.Ly

    @property
    def n_sites(self) -> int:
        return self.Lx * self.Ly

    @property
    def has_horizontal(self) -> bool:
        return self.Lx >= 2

    @property
    def has_vertical(self) -> bool:
        return self.Ly >= 2

    @property
    def vertical_offset(self) -> int:
        return self.n_sites if self.has_horizontal else 0

    @property
    def n_edges(self) -> int:
        return self.n_sites * (int(self.has_horizontal) + int(self.has_vertical))

    def site(self, x: int, y: int) -> int:
        return (x % self.Lx) + self.Lx * (y % self.Ly)

    def coords(self, s: int) -> Tuple[int, int]:
        return s % self.Lx, s // self.Lx

    def h_edge(self, x: int, y: int) -> int:
        if not self.has_horizontal:
            raise LatticeError("lattice has no horizontal edges")
        return self.site(x, y)

    def v_edge(self, x: int, y: int) -> int:
        if not self.has_vertical:
            raise LatticeError("lattice has no vertical edges")
        return self.vertical_offset + self.site(x, y)

    def is_vertical(self, e: int) -> bool:
        return self.has_vertical and e >= self.vertical_offset

    def edge_origin(self, e: int) -> Tuple[int, int]:
        """Coordinates (x, y) of the lower/left endpoint of edge e."""
        s = e - self.vertical_offset if self.is_vertical(e) else e
        return self.coords(s)

    @cached_property
    def edge_sites(self) -> np.ndarray:
        """(n_edges, 2) array of the sites each edge joins."""
        pairs: List[Tuple[int, int]] = []
        if self.has_horizontal:
            pairs.extend((self.site(x, y), self.site(x + 1, y)) for y in range(self.Ly) for x in range(self.Lx))
        if self.has_vertical:
            pairs.extend((self.site(x, y), self.site(x, y + 1)) for y in range(self.Ly) for x in range(self.Lx))
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def site_edges(self) -> List[List[int]]:
        incident: List[List[int]] = [[] for _ in range(self.n_sites)]
        for e, (i, j) in enumerate(self.edge_sites):
            incident[int(i)].append(e)
            incident[int(j)].append(e)
        return incident

    @cached_property
    def neighbors(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.n_sites)]
        for i, j in self.edge_sites:
            out[int(i)].append(int(j))
            out[int(j)].append(int(i))
        return out

    @cached_property
    def even_mask(self) -> np.ndarray:
        xs = np.arange(self.n_sites) % self.Lx
        ys = np.arange(self.n_sites) // self.Lx
        return (xs + ys) % 2 == 0

    # ---- dual (plaquette) geometry ----

    def plaquette(self, x: int, y: int) -> int:
        return self.site(x, y)

    def plaquette_sides(self, p: int) -> Tuple[int, int, int, int]:
        """Primal edges bounding plaquette p, ordered N, E, S, W."""
        x, y = self.coords(p)
        return self.h_edge(x, y + 1), self.v_edge(x + 1, y), self.h_edge(x, y), self.v_edge(x, y)

    @cached_property
    def side_table(self) -> np.ndarray:
        """(n_plaquettes, 4) edge indices, N/E/S/W; needs both edge kinds."""
        if not (self.has_horizontal and self.has_vertical):
            return np.zeros((0, 4), dtype=np.int64)
        return np.array([self.plaquette_sides(p) for p in range(self.n_sites)], dtype=np.int64)

    @cached_property
    def edge_plaquettes(self) -> np.ndarray:
        """
        (n_edges, 2, 2) table: for each edge the two plaquettes it bounds and
        the side slot it occupies in each.
        """
        table = np.zeros((self.n_edges, 2, 2), dtype=np.int64)
        for p, sides in enumerate(self.side_table):
            for slot, e in enumerate(sides):
                # slot S/W is the "first" plaquette of that edge (the one it starts)
                k = 0 if slot in (SOUTH, WEST) else 1
                table[e, k] = (p, slot)
        return table

    def dual_step(self, p: int, slot: int) -> int:
        x, y = self.coords(p)
        dx, dy = SIDE_STEPS[slot]
        return self.plaquette(x + dx, y + dy)

    def describe(self) -> str:
        return f"{self.Lx}x{self.Ly} torus ({self.n_sites} sites, {self.n_edges} edges)"


def build_torus(L0: int) -> TorusLattice:
    """Square L0 x L0 torus; L0 must be even and at least 4."""
    if not isinstance(L0, (int, np.integer)) or isinstance(L0, bool):
        raise LatticeError(f"L0 must be an integer, got {L0!r}")
    if L0 < 4 or L0 % 2:
        raise LatticeError(f"L0 must be an even integer >= 4, got {L0}")
    lat = TorusLattice(int(L0), int(L0))
    logger.debug(f"Built {lat.describe()}")
    return lat
