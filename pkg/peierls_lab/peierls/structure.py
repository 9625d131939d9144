"""
Bottleneck structures: well/bottleneck loop caps plus the indicator family.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from peierls_lab.errors import StructureError
from peierls_lab.lattice.loops import DEFAULT_LOOP_BUDGET, DWLoop, loop_table, make_loop, sample_loops
from peierls_lab.lattice.torus import TorusLattice

logger = logging.getLogger(__name__)

LOG3 = math.log(3.0)


def asymptotic_theta(R: int) -> float:
    return 5.0 * R * LOG3


@dataclass(eq=False)
class BottleneckStructure:
    lattice: TorusLattice
    R: int
    L: int
    bottleneck_cap: int
    theta: float
    indicator_table: Dict[int, np.ndarray]
    sampled: List[DWLoop] = field(default_factory=list)
    Delta: Optional[float] = None
    loop_budget: int = DEFAULT_LOOP_BUDGET
    order_parameter: bool = False
    asymptotic: bool = False

    @property
    def indicator_lengths(self) -> List[int]:
        return sorted(set(self.indicator_table) | {lp.length for lp in self.sampled})

    @property
    def n_indicators(self) -> int:
        return sum(len(rows) for rows in self.indicator_table.values()) + len(self.sampled)

    @property
    def theta_audit(self) -> float:
        """Entropy rate that makes |family| = e^{theta L} hold exactly."""
        return math.log(max(self.n_indicators, 1)) / self.L

    @property
    def heuristic(self) -> bool:
        return bool(self.sampled)

    def indicator_rows(self) -> Iterator[Tuple[int, np.ndarray]]:
        """(length, rows) blocks covering the exhaustive and sampled indicators."""
        for n in sorted(self.indicator_table):
            yield n, self.indicator_table[n]
        by_len: Dict[int, List[Tuple[int, ...]]] = {}
        for lp in self.sampled:
            by_len.setdefault(lp.length, []).append(lp.links)
        for n in sorted(by_len):
            yield n, np.array(by_len[n], dtype=np.int64)

    @property
    def indicators(self) -> Iterator[DWLoop]:
        for n in sorted(self.indicator_table):
            for row in self.indicator_table[n]:
                yield make_loop(row)
        yield from self.sampled

    def indicator(self, ident: int) -> DWLoop:
        """Indicator by position in the iteration order of `indicators`."""
        for i, lp in enumerate(self.indicators):
            if i == ident:
                return lp
        raise StructureError(f"indicator id {ident} outside 0..{self.n_indicators - 1}")

    def longest_indicators(self) -> np.ndarray:
        n = max(self.indicator_table)
        return self.indicator_table[n]

    @cached_property
    def out_indicator_table(self) -> Dict[int, np.ndarray]:
        """Global-structure family: every loop of length >= L up to the loop budget."""
        if self.bottleneck_cap >= self.loop_budget:
            return self.indicator_table
        return loop_table(self.lattice, self.loop_budget, min_len=self.L, budget=self.loop_budget)

    @property
    def out_indicators(self) -> Iterator[DWLoop]:
        for n in sorted(self.out_indicator_table):
            for row in self.out_indicator_table[n]:
                yield make_loop(row)

    def with_delta(self, Delta: float) -> 'BottleneckStructure':
        self.Delta = float(Delta)
        return self

    def contains_length(self, length: int) -> bool:
        return self.L <= length <= self.bottleneck_cap

    def summary(self) -> Dict[str, Any]:
        return {
            'lattice': {'Lx': self.lattice.Lx, 'Ly': self.lattice.Ly},
            'R': self.R, 'L': self.L, 'bottleneck_cap': self.bottleneck_cap,
            'theta': self.theta, 'theta_audit': self.theta_audit, 'Delta': self.Delta,
            'n_indicators': self.n_indicators, 'n_sampled': len(self.sampled),
            'heuristic': self.heuristic, 'asymptotic': self.asymptotic,
            'order_parameter': self.order_parameter,
        }


def build_bottleneck_structure(lat: TorusLattice, R: int = 1, overrides: Optional[Dict[str, Any]] = None,
                               loop_budget: int = DEFAULT_LOOP_BUDGET, n_sampled: int = 0, seed: int = 0,
                               order_parameter: bool = False) -> BottleneckStructure:
    """
    Without overrides, L = floor(L0 / (6R)) and cap = 4RL. Desk-scale runs
    pass explicit {'L', 'cap'} (and optionally 'Delta', 'theta').
    """
    if R < 1:
        raise StructureError(f"R must be >= 1, got {R}")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    asymptotic = 'L' not in overrides
    L0 = min(lat.Lx, lat.Ly)
    L = int(overrides.get('L', L0 // (6 * R)))
    if L < 4:
        if asymptotic:
            raise StructureError(
                f"L = floor({L0}/(6*{R})) = {L} < 4; pass desk-scale overrides such as {{'L': 4, 'cap': 8}}"
            )
        raise StructureError(f"well loop cap L must be >= 4, got {L}")
    cap = int(overrides.get('cap', overrides.get('bottleneck_cap', 4 * R * L)))
    if cap < L:
        raise StructureError(f"bottleneck cap {cap} is below the well cap L={L}")
    theta = float(overrides.get('theta', asymptotic_theta(R)))

    exhaustive_max = min(cap, loop_budget)
    table = loop_table(lat, exhaustive_max, min_len=L, budget=loop_budget) if exhaustive_max >= L else {}
    sampled: List[DWLoop] = []
    if cap > loop_budget and n_sampled > 0:
        sampled = sample_loops(lat, loop_budget + 1, cap, n_sampled, seed)
        logger.warning(f"Indicators longer than {loop_budget} are sampled ({len(sampled)} loops); estimates are heuristic")

    bs = BottleneckStructure(
        lattice=lat, R=int(R), L=L, bottleneck_cap=cap, theta=theta, indicator_table=table,
        sampled=sampled, Delta=overrides.get('Delta'), loop_budget=loop_budget,
        order_parameter=order_parameter, asymptotic=asymptotic,
    )
    logger.info(f"Bottleneck structure on {lat.describe()}: L={L}, cap={cap}, "
                f"{bs.n_indicators} indicators, theta={theta:.4f}, theta_audit={bs.theta_audit:.4f}")
    return bs


@dataclass
class IndicatorAudit:
    theta: float
    theta_audit: float
    rows: List[Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return all(r['within_entropy'] and r['within_paths'] for r in self.rows)


def audit_indicator_counts(bs: BottleneckStructure) -> IndicatorAudit:
    """Indicator counts per length against e^{theta L'} and the 2 L0^2 3^{L'-1} path bound."""
    n_edges = bs.lattice.n_edges
    counts: Dict[int, int] = {n: len(rows) for n, rows in bs.indicator_table.items()}
    sampled_counts: Dict[int, int] = {}
    for lp in bs.sampled:
        sampled_counts[lp.length] = sampled_counts.get(lp.length, 0) + 1
    rows = []
    for n in sorted(set(counts) | set(sampled_counts)):
        count = counts.get(n, sampled_counts.get(n, 0))
        # compare in log space; e^{theta n} overflows for long loops
        log_count = math.log(count) if count else -math.inf
        rows.append({
            'length': n,
            'count': count,
            'sampled': n not in counts,
            'log_count': log_count,
            'log_entropy_cap': bs.theta * n,
            'log_path_cap': math.log(n_edges) + (n - 1) * LOG3,
            'within_entropy': log_count <= bs.theta * n,
            'within_paths': log_count <= math.log(n_edges) + (n - 1) * LOG3,
        })
    audit = IndicatorAudit(theta=bs.theta, theta_audit=bs.theta_audit, rows=rows)
    if not audit.passed:
        logger.warning(f"Indicator count audit failed on {bs.lattice.describe()}")
    return audit
