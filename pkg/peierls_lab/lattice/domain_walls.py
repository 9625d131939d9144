"""
Domain-wall decomposition of spin configurations and well/bottleneck tags.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from peierls_lab.errors import ClassificationError, LatticeError
from peierls_lab.lattice.loops import DWLoop, make_loop
from peierls_lab.lattice.spins import MAX_TABLE_SITES, spin_columns
from peierls_lab.lattice.torus import EAST, NORTH, SIDE_STEPS, SOUTH, WEST, TorusLattice

logger = logging.getLogger(__name__)

# north pairs with west, east with south
CROSSING_PARTNER = {NORTH: WEST, WEST: NORTH, EAST: SOUTH, SOUTH: EAST}

# site moves for region connectivity: four neighbours plus the SW-NE diagonal
REGION_MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))
LATTICE_MOVES = REGION_MOVES[:4]

OUT, WELL_1, WELL_2, BOTTLENECK_1, BOTTLENECK_2 = 0, 1, 2, 3, 4
TAG_NAMES = {OUT: 'Out', WELL_1: 'Well(1)', WELL_2: 'Well(2)', BOTTLENECK_1: 'Bottleneck(1)', BOTTLENECK_2: 'Bottleneck(2)'}
FLIP_TAG = np.array([OUT, WELL_2, WELL_1, BOTTLENECK_2, BOTTLENECK_1], dtype=np.uint8)


@dataclass(frozen=True)
class ConfigClass:
    kind: str
    k: Optional[int] = None

    @classmethod
    def well(cls, k: int) -> 'ConfigClass':
        return cls('well', k)

    @classmethod
    def bottleneck(cls, k: int) -> 'ConfigClass':
        return cls('bottleneck', k)

    @classmethod
    def out(cls) -> 'ConfigClass':
        return cls('out', None)

    @classmethod
    def from_code(cls, code: int) -> 'ConfigClass':
        code = int(code)
        if code == OUT:
            return cls.out()
        if code in (WELL_1, WELL_2):
            return cls.well(code)
        return cls.bottleneck(code - 2)

    @property
    def code(self) -> int:
        if self.kind == 'well':
            return self.k
        if self.kind == 'bottleneck':
            return self.k + 2
        return OUT

    def __str__(self) -> str:
        return TAG_NAMES[self.code]


@dataclass
class DWDecomposition:
    loops: List[DWLoop]
    sea_value: Optional[int]
    resolved_crossings: List[int] = field(default_factory=list)
    excited_edges: Tuple[int, ...] = ()

    @property
    def has_winding(self) -> bool:
        return any(not lp.is_contractible for lp in self.loops)

    @property
    def max_loop_length(self) -> int:
        return max((lp.length for lp in self.loops), default=0)


def _require_decomposable(lat: TorusLattice):
    if lat.Lx < 2 or lat.Ly < 2:
        raise LatticeError(f"domain walls need a two-dimensional torus, got {lat.Lx}x{lat.Ly}")


def excited_edges(lat: TorusLattice, z: np.ndarray) -> np.ndarray:
    es = lat.edge_sites
    return np.flatnonzero(z[es[:, 0]] != z[es[:, 1]])


def _winding_rank(vectors: Set[Tuple[int, int]]) -> int:
    vecs = [v for v in vectors if v != (0, 0)]
    if not vecs:
        return 0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            if vecs[i][0] * vecs[j][1] - vecs[i][1] * vecs[j][0] != 0:
                return 2
    return 1


def _components(lat: TorusLattice, label: np.ndarray, moves) -> List[Tuple[int, List[int], int]]:
    """
    Same-label connected components with the rank of their winding lattice.
    Returns (label value, sites, rank) triples.
    """
    Lx, Ly = lat.Lx, lat.Ly
    offset = {}
    comps = []
    for start in range(lat.n_sites):
        if start in offset:
            continue
        sx, sy = lat.coords(start)
        offset[start] = (sx, sy)
        queue = deque([start])
        members = [start]
        windings: Set[Tuple[int, int]] = set()
        while queue:
            s = queue.popleft()
            ux, uy = offset[s]
            for dx, dy in moves:
                t = lat.site(ux + dx, uy + dy)
                if label[t] != label[start]:
                    continue
                pos = (ux + dx, uy + dy)
                if t in offset:
                    ox, oy = offset[t]
                    if (ox, oy) != pos:
                        windings.add(((pos[0] - ox) // Lx, (pos[1] - oy) // Ly))
                    continue
                offset[t] = pos
                members.append(t)
                queue.append(t)
        comps.append((int(label[start]), members, _winding_rank(windings)))
    return comps


def sea_value(lat: TorusLattice, z: np.ndarray) -> Optional[int]:
    """Spin of the region that wraps the torus in both directions, if any."""
    for value, _, rank in _components(lat, np.asarray(z), REGION_MOVES):
        if rank == 2:
            return value
    return None


def _pairing(sides_excited: Sequence[bool], slot: int) -> int:
    if all(sides_excited):
        return CROSSING_PARTNER[slot]
    others = [s for s in range(4) if s != slot and sides_excited[s]]
    return others[0]


def dw_decompose(lat: TorusLattice, z: np.ndarray) -> DWDecomposition:
    """Split the excited edges of z into link-disjoint domain-wall loops."""
    _require_decomposable(lat)
    z = np.asarray(z)
    excited = excited_edges(lat, z)
    sea = int(z[0]) if len(excited) == 0 else sea_value(lat, z)
    if len(excited) == 0:
        return DWDecomposition(loops=[], sea_value=sea)

    mask = np.zeros(lat.n_edges, dtype=bool)
    mask[excited] = True
    sides = lat.side_table
    ep = lat.edge_plaquettes
    side_mask = mask[sides]
    crossings = sorted(int(p) for p in np.flatnonzero(side_mask.all(axis=1)))

    seen = np.zeros(lat.n_edges, dtype=bool)
    loops: List[DWLoop] = []
    for e0 in excited:
        if seen[e0]:
            continue
        links = []
        dx = dy = 0
        # leave the first plaquette of e0 through its S/W slot
        p, slot = ep[e0, 0]
        e = e0
        while True:
            links.append(int(e))
            seen[e] = True
            step = SIDE_STEPS[slot]
            dx, dy = dx + step[0], dy + step[1]
            # arrive at the plaquette on the other side of e
            p, in_slot = ep[e, 1] if ep[e, 0, 0] == p and ep[e, 0, 1] == slot else ep[e, 0]
            slot = _pairing(side_mask[p], int(in_slot))
            e = sides[p, slot]
            if e == e0 and seen[e]:
                break
        winding = (dx // lat.Lx, dy // lat.Ly)
        loops.append(make_loop(links, winding=winding))
    return DWDecomposition(loops=loops, sea_value=sea, resolved_crossings=crossings,
                           excited_edges=tuple(int(e) for e in excited))


def loop_interior(lat: TorusLattice, loop: DWLoop) -> List[int]:
    """Sites enclosed by a contractible loop (the side that does not wrap)."""
    if not loop.is_contractible:
        raise LatticeError("a winding loop has no interior")
    cut = loop.link_set
    label = -np.ones(lat.n_sites, dtype=np.int8)
    label[0] = 0
    queue = deque([0])
    while queue:
        s = queue.popleft()
        for e in lat.site_edges[s]:
            i, j = lat.edge_sites[e]
            t = int(j) if int(i) == s else int(i)
            val = label[s] ^ (1 if e in cut else 0)
            if label[t] < 0:
                label[t] = val
                queue.append(t)
    comps = _components(lat, label, REGION_MOVES)
    rank = {0: 0, 1: 0}
    for value, _, r in comps:
        rank[value] = max(rank[value], r)
    if rank[0] == rank[1]:
        inside = 1 if (label == 1).sum() <= (label == 0).sum() else 0
    else:
        inside = 0 if rank[0] < rank[1] else 1
    return sorted(int(s) for s in np.flatnonzero(label == inside))


def rebuild_config(lat: TorusLattice, dec: DWDecomposition) -> np.ndarray:
    """Flip every loop interior starting from the uniform sea configuration."""
    if dec.sea_value is None or dec.has_winding:
        raise LatticeError("rebuild needs a sea and contractible loops only")
    z = np.full(lat.n_sites, dec.sea_value, dtype=np.int8)
    for lp in dec.loops:
        z[loop_interior(lat, lp)] *= -1
    return z


def classify_config(z: np.ndarray, bs, dec: Optional[DWDecomposition] = None) -> ConfigClass:
    """
    Well(k) if every loop has length <= L, Bottleneck(k) if every loop fits
    under the bottleneck cap, Out otherwise. k = 1 for a plus sea.
    """
    lat = bs.lattice
    z = np.asarray(z)
    dec = dec or dw_decompose(lat, z)
    if dec.has_winding:
        return ConfigClass.out()
    if dec.sea_value is None:
        raise ClassificationError("contractible loops without a percolating sea")
    k = 1 if dec.sea_value > 0 else 2
    longest = dec.max_loop_length
    if longest <= bs.L:
        if getattr(bs, 'order_parameter', False) and abs(float(z.mean())) < 1.0 / 3.0:
            return ConfigClass.bottleneck(k)
        return ConfigClass.well(k)
    if longest <= bs.bottleneck_cap:
        return ConfigClass.bottleneck(k)
    return ConfigClass.out()


@dataclass(frozen=True)
class WellCaps:
    """Loop-length caps that define wells and bottlenecks on a lattice."""
    lattice: TorusLattice
    L: int
    bottleneck_cap: int
    order_parameter: bool = False


@dataclass(frozen=True)
class BasisClassification:
    tags: np.ndarray
    max_loop: np.ndarray
    winding: np.ndarray

    def mask(self, *codes: int) -> np.ndarray:
        return np.isin(self.tags, np.array(codes, dtype=np.uint8))

    def counts(self) -> Dict[str, int]:
        return {TAG_NAMES[c]: int((self.tags == c).sum()) for c in TAG_NAMES}


def basis_classification(bs) -> BasisClassification:
    """Tag, longest loop and winding flag for every basis state (cached)."""
    caps = WellCaps(bs.lattice, int(bs.L), int(bs.bottleneck_cap), bool(getattr(bs, 'order_parameter', False)))
    return _classify_all(caps)


@lru_cache(maxsize=16)
def _classify_all(caps: WellCaps) -> BasisClassification:
    lat = caps.lattice
    n = lat.n_sites
    if n > MAX_TABLE_SITES:
        raise LatticeError(f"basis classification needs <= {MAX_TABLE_SITES} sites, got {n}")
    dim = 1 << n
    half = dim >> 1
    tags = np.zeros(dim, dtype=np.uint8)
    max_loop = np.zeros(dim, dtype=np.int16)
    winding = np.zeros(dim, dtype=bool)

    chunk = 4096
    for lo in range(0, half, chunk):
        idx = np.arange(lo, min(lo + chunk, half), dtype=np.int64)
        for b, z in zip(idx, spin_columns(idx, n)):
            dec = dw_decompose(lat, z)
            tags[b] = classify_config(z, caps, dec).code
            max_loop[b] = dec.max_loop_length
            winding[b] = dec.has_winding
    # the global flip maps index b to b ^ (dim - 1) and swaps k
    tags[half:] = FLIP_TAG[tags[:half]][::-1]
    max_loop[half:] = max_loop[:half][::-1]
    winding[half:] = winding[:half][::-1]
    result = BasisClassification(tags=tags, max_loop=max_loop, winding=winding)
    logger.info(f"Classified {dim} basis states on {lat.describe()}: {result.counts()}")
    return result


def hamming_separation(classification: BasisClassification, n_sites: int, source: int, target: int) -> Optional[int]:
    """Smallest Hamming distance between two tag classes (None if unreachable)."""
    src = classification.tags == source
    dst = classification.tags == target
    if not src.any() or not dst.any():
        return None
    dim = 1 << n_sites
    seen = src.copy()
    frontier = np.flatnonzero(src)
    flips = (1 << np.arange(n_sites)).astype(np.int64)
    for dist in range(1, n_sites + 1):
        nxt = np.unique((frontier[:, None] ^ flips[None, :]).ravel())
        nxt = nxt[~seen[nxt]]
        if dst[nxt].any():
            return dist
        seen[nxt] = True
        frontier = nxt
        if len(frontier) == 0 or seen.sum() == dim:
            break
    return None
