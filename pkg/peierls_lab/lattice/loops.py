"""
Domain-wall loop enumeration.

A loop is a closed trail on the plaquette (dual) lattice. A plaquette may be
visited twice only when the two passes pair its sides north/west and
east/south, which is how four-valent crossings are resolved when a
configuration is decomposed. Loop shapes are grown once on the infinite
lattice, rooted at their lowest (y, x) plaquette, then translated onto the
torus.
"""

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from peierls_lab.errors import BudgetExceededError, LatticeError
from peierls_lab.lattice.torus import (
    EAST, NORTH, OPPOSITE, SIDE_STEPS, SOUTH, WEST, TorusLattice,
)

logger = logging.getLogger(__name__)

DEFAULT_LOOP_BUDGET = 14

RULE_PAIRS = (frozenset((NORTH, WEST)), frozenset((EAST, SOUTH)))

Shape = Tuple[int, ...]
Vertex = Tuple[int, int]


@dataclass(frozen=True)
class DWLoop:
    links: Tuple[int, ...]
    canonical_key: Tuple[int, ...]
    winding: Tuple[int, int] = (0, 0)
    heuristic: bool = False

    @property
    def length(self) -> int:
        return len(self.links)

    @property
    def is_contractible(self) -> bool:
        return self.winding == (0, 0)

    @property
    def link_set(self) -> frozenset:
        return frozenset(self.links)


def canonical_key(links: Sequence[int]) -> Tuple[int, ...]:
    """Smallest rotation of the link cycle over both orientations."""
    seq = list(links)
    n = len(seq)
    best: Optional[Tuple[int, ...]] = None
    for cyc in (seq, seq[::-1]):
        for r in range(n):
            cand = tuple(cyc[r:] + cyc[:r])
            if best is None or cand < best:
                best = cand
    return best or ()


def make_loop(links: Sequence[int], winding: Tuple[int, int] = (0, 0), heuristic: bool = False) -> DWLoop:
    links = tuple(int(e) for e in links)
    return DWLoop(links=links, canonical_key=canonical_key(links), winding=winding, heuristic=heuristic)


# ---------------------------------------------------------------------------
# shape growth on Z^2
# ---------------------------------------------------------------------------

def _edge_key(v: Vertex, slot: int) -> Tuple[int, int, int]:
    x, y = v
    if slot == SOUTH:
        return x, y - 1, NORTH
    if slot == WEST:
        return x - 1, y, EAST
    return x, y, slot


def _after_origin(v: Vertex) -> bool:
    return v[1] > 0 or (v[1] == 0 and v[0] > 0)


def _revisit_allowed(prior: List[Tuple[int, int]], in_slot: int) -> Optional[int]:
    """Return the forced exit slot for a second pass, or None if illegal."""
    if len(prior) != 1:
        return None
    first = frozenset(prior[0])
    if first not in RULE_PAIRS:
        return None
    other = RULE_PAIRS[1] if first == RULE_PAIRS[0] else RULE_PAIRS[0]
    if in_slot not in other:
        return None
    (out,) = tuple(other - {in_slot})
    return out


def _exit_options(pos: Vertex, in_slot: int, visits: Dict[Vertex, List[Tuple[int, int]]]) -> List[int]:
    prior = visits.get(pos)
    if prior:
        forced = _revisit_allowed(prior, in_slot)
        return [] if forced is None else [forced]
    return [s for s in range(4) if s != in_slot]


def _closing_distance(v: Vertex) -> int:
    # steps needed to reach (0, 1) and then drop into the origin
    return abs(v[0]) + abs(v[1] - 1) + 1


def _grow_shapes(max_len: int) -> List[Shape]:
    shapes: List[Shape] = []
    origin = (0, 0)
    visits: Dict[Vertex, List[Tuple[int, int]]] = {origin: [(NORTH, EAST)]}
    used = {_edge_key(origin, EAST)}
    path: List[int] = [EAST]

    def extend(pos: Vertex, in_slot: int):
        for out in _exit_options(pos, in_slot, visits):
            key = _edge_key(pos, out)
            if key in used:
                continue
            dx, dy = SIDE_STEPS[out]
            nxt = (pos[0] + dx, pos[1] + dy)
            n = len(path) + 1
            if nxt == origin:
                if out == SOUTH and n >= 4:
                    shapes.append(tuple(path) + (out,))
                continue
            if not _after_origin(nxt) or _closing_distance(nxt) > max_len - n:
                continue
            nxt_in = OPPOSITE[out]
            prior = visits.get(nxt)
            if prior and _revisit_allowed(prior, nxt_in) is None:
                continue
            used.add(key)
            visits.setdefault(pos, []).append((in_slot, out))
            path.append(out)
            extend(nxt, nxt_in)
            path.pop()
            visits[pos].pop()
            if not visits[pos]:
                del visits[pos]
            used.discard(key)

    extend((1, 0), WEST)
    return shapes


@lru_cache(maxsize=None)
def loop_shapes(max_len: int) -> Tuple[Shape, ...]:
    """All rooted loop shapes (step-direction tuples) with length <= max_len."""
    if max_len < 4:
        return ()
    shapes = tuple(sorted(_grow_shapes(max_len), key=lambda s: (len(s), s)))
    logger.info(f"Grew {len(shapes)} loop shapes up to length {max_len}")
    return shapes


def shape_counts(max_len: int) -> Dict[int, int]:
    counts: Dict[int, int] = {}
    for s in loop_shapes(max_len):
        counts[len(s)] = counts.get(len(s), 0) + 1
    return counts


def shape_edges(shape: Shape) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Relative primal edges crossed by a shape: (kind, ex, ey) with kind 0 for
    horizontal, 1 for vertical, plus the (n, 2) array of visited vertices.
    """
    kinds, exs, eys, verts = [], [], [], []
    x, y = 0, 0
    for d in shape:
        verts.append((x, y))
        if d == NORTH:
            kinds.append(0); exs.append(x); eys.append(y + 1)
        elif d == EAST:
            kinds.append(1); exs.append(x + 1); eys.append(y)
        elif d == SOUTH:
            kinds.append(0); exs.append(x); eys.append(y)
        else:
            kinds.append(1); exs.append(x); eys.append(y)
        dx, dy = SIDE_STEPS[d]
        x, y = x + dx, y + dy
    return np.array(kinds), np.array(exs), np.array(eys), np.array(verts)


def _place(lat: TorusLattice, kinds, exs, eys, tx, ty) -> np.ndarray:
    base = (np.add.outer(tx, exs) % lat.Lx) + lat.Lx * (np.add.outer(ty, eys) % lat.Ly)
    return base + kinds * lat.vertical_offset


def _valid_on_torus(lat: TorusLattice, shape: Shape, verts: np.ndarray, tx: int, ty: int, links: np.ndarray) -> bool:
    if len(set(links.tolist())) != len(links):
        return False
    passes: Dict[int, List[frozenset]] = {}
    n = len(shape)
    for i in range(n):
        vx, vy = verts[i]
        p = lat.plaquette(int(vx) + tx, int(vy) + ty)
        in_slot = OPPOSITE[shape[i - 1]]
        passes.setdefault(p, []).append(frozenset((in_slot, shape[i])))
    for pairs in passes.values():
        if len(pairs) > 2:
            return False
        if len(pairs) == 2 and set(pairs) != set(RULE_PAIRS):
            return False
    return True


def _shape_may_wrap(lat: TorusLattice, verts: np.ndarray) -> bool:
    span_x = verts[:, 0].max() - verts[:, 0].min()
    span_y = verts[:, 1].max() - verts[:, 1].min()
    return span_x + 1 >= lat.Lx or span_y + 1 >= lat.Ly


def _check_budget(max_len: int, budget: int):
    if max_len < 4:
        raise LatticeError(f"max_len must be >= 4, got {max_len}")
    if max_len > budget:
        raise BudgetExceededError(
            "loop enumeration", max_len, budget,
            hint="use sample_loops for longer loops or raise structure.loop_budget",
        )


def _require_plaquettes(lat: TorusLattice):
    if lat.Lx < 3 or lat.Ly < 3:
        raise LatticeError(f"loop geometry needs both sides >= 3, got {lat.Lx}x{lat.Ly}")


def loop_table(lat: TorusLattice, max_len: int, min_len: int = 4,
               budget: int = DEFAULT_LOOP_BUDGET) -> Dict[int, np.ndarray]:
    """Every contractible loop of each length as rows of dual-edge indices."""
    _require_plaquettes(lat)
    _check_budget(max_len, budget)
    tx, ty = np.meshgrid(np.arange(lat.Lx), np.arange(lat.Ly))
    tx, ty = tx.ravel(), ty.ravel()
    rows: Dict[int, List[np.ndarray]] = {}
    wrapped: Dict[int, List[np.ndarray]] = {}
    for shape in loop_shapes(max_len):
        n = len(shape)
        if n < min_len:
            continue
        kinds, exs, eys, verts = shape_edges(shape)
        placed = _place(lat, kinds, exs, eys, tx, ty)
        if _shape_may_wrap(lat, verts):
            keep = [i for i in range(len(tx)) if _valid_on_torus(lat, shape, verts, int(tx[i]), int(ty[i]), placed[i])]
            if keep:
                wrapped.setdefault(n, []).append(placed[keep])
        elif len(placed):
            rows.setdefault(n, []).append(placed)
    table: Dict[int, np.ndarray] = {}
    for n in sorted(set(rows) | set(wrapped)):
        chunks = list(rows.get(n, []))
        if n in wrapped:
            # shapes as wide as the torus may land on the same loop twice
            stacked = np.concatenate(wrapped[n], axis=0)
            keys: Dict[Tuple[int, ...], int] = {}
            for i, row in enumerate(stacked):
                keys.setdefault(canonical_key(row.tolist()), i)
            chunks.append(stacked[sorted(keys.values())])
        table[n] = np.concatenate(chunks, axis=0)
    logger.info(f"Loop table on {lat.describe()}: " + ", ".join(f"{n}:{len(a)}" for n, a in table.items()))
    return table


def enumerate_loops(lat: TorusLattice, max_len: int, anchor: Optional[int] = None,
                    budget: int = DEFAULT_LOOP_BUDGET) -> List[DWLoop]:
    """All contractible loops up to max_len, optionally through one edge."""
    _require_plaquettes(lat)
    _check_budget(max_len, budget)
    if anchor is None:
        table = loop_table(lat, max_len, budget=budget)
        return [make_loop(row) for n in sorted(table) for row in table[n]]

    if not 0 <= anchor < lat.n_edges:
        raise LatticeError(f"anchor edge {anchor} outside 0..{lat.n_edges - 1}")
    a_kind = 1 if lat.is_vertical(anchor) else 0
    ax, ay = lat.edge_origin(anchor)
    found: Dict[Tuple[int, ...], DWLoop] = {}
    for shape in loop_shapes(max_len):
        kinds, exs, eys, verts = shape_edges(shape)
        for i in np.flatnonzero(kinds == a_kind):
            tx, ty = ax - int(exs[i]), ay - int(eys[i])
            links = _place(lat, kinds, exs, eys, np.array([tx]), np.array([ty]))[0]
            if not _valid_on_torus(lat, shape, verts, tx, ty, links):
                continue
            loop = make_loop(links)
            found.setdefault(loop.canonical_key, loop)
    return sorted(found.values(), key=lambda lp: (lp.length, lp.canonical_key))


def sample_loops(lat: TorusLattice, min_len: int, max_len: int, n: int, seed: int,
                 anchor: Optional[int] = None, max_attempts: Optional[int] = None) -> List[DWLoop]:
    """
    Random valid loops with lengths in [min_len, max_len], grown by a pruned
    random walk and deduplicated. The distribution is not uniform over loops;
    results carry heuristic=True.
    """
    _require_plaquettes(lat)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x100B])))
    lengths = [m for m in range(max(4, min_len + min_len % 2), max_len + 1, 2)]
    if not lengths:
        return []
    attempts = max_attempts or 200 * max(n, 1)
    found: Dict[Tuple[int, ...], DWLoop] = {}
    for _ in range(attempts):
        if len(found) >= n:
            break
        target = int(rng.choice(lengths))
        shape = _random_shape(target, rng)
        if shape is None:
            continue
        kinds, exs, eys, verts = shape_edges(shape)
        if anchor is None:
            tx, ty = int(rng.integers(lat.Lx)), int(rng.integers(lat.Ly))
        else:
            a_kind = 1 if lat.is_vertical(anchor) else 0
            ax, ay = lat.edge_origin(anchor)
            choices = np.flatnonzero(kinds == a_kind)
            i = int(rng.choice(choices))
            tx, ty = ax - int(exs[i]), ay - int(eys[i])
        links = _place(lat, kinds, exs, eys, np.array([tx]), np.array([ty]))[0]
        if not _valid_on_torus(lat, shape, verts, tx, ty, links):
            continue
        loop = make_loop(links, heuristic=True)
        found.setdefault(loop.canonical_key, loop)
    if len(found) < n:
        logger.warning(f"sample_loops produced {len(found)} of {n} requested loops")
    return list(found.values())


def _random_shape(target: int, rng: np.random.Generator) -> Optional[Shape]:
    origin = (0, 0)
    visits: Dict[Vertex, List[Tuple[int, int]]] = {origin: [(NORTH, EAST)]}
    used = {_edge_key(origin, EAST)}
    path = [EAST]
    pos, in_slot = (1, 0), WEST
    while True:
        n = len(path) + 1
        options = []
        for out in _exit_options(pos, in_slot, visits):
            key = _edge_key(pos, out)
            if key in used:
                continue
            dx, dy = SIDE_STEPS[out]
            nxt = (pos[0] + dx, pos[1] + dy)
            if nxt == origin:
                if out == SOUTH and n == target:
                    options.append((out, nxt))
                continue
            if n >= target or _closing_distance(nxt) > target - n:
                continue
            prior = visits.get(nxt)
            if prior and _revisit_allowed(prior, OPPOSITE[out]) is None:
                continue
            options.append((out, nxt))
        if not options:
            return None
        out, nxt = options[int(rng.integers(len(options)))]
        path.append(out)
        if nxt == origin:
            return tuple(path)
        used.add(_edge_key(pos, out))
        visits.setdefault(pos, []).append((in_slot, out))
        pos, in_slot = nxt, OPPOSITE[out]


def loops_through(table: Dict[int, np.ndarray], edge: int) -> Dict[int, int]:
    """Number of tabulated loops of each length containing a given edge."""
    return {n: int(np.any(rows == edge, axis=1).sum()) for n, rows in table.items()}


def export_loops(loops: Iterable[DWLoop], path: str):
    """Save loops as a JSON array of dual-edge index lists."""
    data = [list(lp.links) for lp in loops]
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)


def load_loops(path: str) -> List[DWLoop]:
    with open(path, 'r', encoding='utf-8') as f:
        return [make_loop(links) for links in json.load(f)]
