"""
Energy-barrier certificates for loop indicators.

For a loop B with at least m = ceil(f * L_B) of its links excited, flipping
the loop interior changes H0 by sum(excited J) - sum(unexcited J). The worst
case over excitation patterns leaves the L_B - m largest positive couplings
unexcited:

    E0 = sum J - 2 * sum(top L_B - m of max(J, 0))
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np

from peierls_lab.classical.hamiltonian import ClassicalHamiltonian
from peierls_lab.errors import BudgetExceededError, StructureError
from peierls_lab.lattice.loops import DWLoop
from peierls_lab.peierls.structure import BottleneckStructure

logger = logging.getLogger(__name__)

FULL = Fraction(1)
FOUR_FIFTHS = Fraction(4, 5)
EXHAUSTIVE_MAX_LEN = 12
# certificate files list failures only above this many indicators
CERTIFICATE_LINE_LIMIT = 50000

Occupancy = Union[Fraction, float, str]


def as_occupancy(occupancy: Occupancy) -> Fraction:
    frac = Fraction(occupancy).limit_denominator(1000)
    if not 0 < frac <= 1:
        raise StructureError(f"occupancy must lie in (0, 1], got {occupancy}")
    return frac


def required_excitations(length: int, occupancy: Occupancy) -> int:
    return math.ceil(as_occupancy(occupancy) * length)


def worst_case_barrier(J_rows: np.ndarray, occupancy: Occupancy) -> np.ndarray:
    """Sorted-coupling worst case for each row of loop couplings."""
    J_rows = np.atleast_2d(np.asarray(J_rows, dtype=np.float64))
    n = J_rows.shape[1]
    free = n - required_excitations(n, occupancy)
    total = J_rows.sum(axis=1)
    if free == 0:
        return total
    top = np.sort(np.maximum(J_rows, 0.0), axis=1)[:, n - free:]
    return total - 2.0 * top.sum(axis=1)


def exhaustive_barrier(J_loop: Sequence[float], occupancy: Occupancy, max_len: int = EXHAUSTIVE_MAX_LEN) -> float:
    """Minimum energy gain over every excitation pattern meeting the occupancy."""
    J_loop = np.asarray(J_loop, dtype=np.float64)
    n = len(J_loop)
    if n > max_len:
        raise BudgetExceededError("exhaustive barrier", n, max_len, hint="loop length; use worst_case_barrier")
    free = n - required_excitations(n, occupancy)
    total = float(J_loop.sum())
    best = total
    for k in range(1, free + 1):
        for unexcited in itertools.combinations(range(n), k):
            best = min(best, total - 2.0 * float(J_loop[list(unexcited)].sum()))
    return best


def passes(barrier: float, threshold: float) -> bool:
    # rounding slack only; Delta * L_B is formed in floating point
    return barrier >= threshold - 1e-12 * max(1.0, abs(threshold))


def oracle_agrees(barrier: float, oracle: Optional[float]) -> bool:
    return oracle is None or abs(barrier - oracle) <= 1e-9 * max(1.0, abs(barrier))


@dataclass
class BarrierCertificate:
    indicator: int
    length: int
    occupancy: str
    barrier_value: float
    threshold: float
    passed: bool
    witness: List[float]
    links: List[int] = field(default_factory=list)
    oracle_value: Optional[float] = None
    heuristic: bool = False

    @property
    def oracle_agrees(self) -> bool:
        return oracle_agrees(self.barrier_value, self.oracle_value)

    def to_dict(self) -> Dict[str, Any]:
        return {'indicator': self.indicator, 'length': self.length, 'occupancy': self.occupancy,
                'barrier_value': self.barrier_value, 'threshold': self.threshold, 'pass': self.passed,
                'witness': self.witness, 'links': self.links, 'oracle_value': self.oracle_value,
                'heuristic': self.heuristic}


def _resolve_delta(bs: BottleneckStructure, Delta: Optional[float]) -> float:
    if Delta is not None:
        return float(Delta)
    if bs.Delta is None:
        raise StructureError("no barrier density Delta: pass Delta or set structure.Delta")
    return float(bs.Delta)


def verify_barrier(H: ClassicalHamiltonian, bs: BottleneckStructure, indicator: DWLoop,
                   occupancy: Occupancy = FULL, Delta: Optional[float] = None, indicator_id: int = -1,
                   with_oracle: bool = True) -> BarrierCertificate:
    if H.lattice != bs.lattice:
        raise StructureError("Hamiltonian and structure live on different lattices")
    if not bs.contains_length(indicator.length):
        raise StructureError(f"loop of length {indicator.length} is outside the indicator range "
                             f"[{bs.L}, {bs.bottleneck_cap}]")
    Delta = _resolve_delta(bs, Delta)
    J_loop = H.J[list(indicator.links)]
    barrier = float(worst_case_barrier(J_loop, occupancy)[0])
    threshold = Delta * indicator.length
    oracle = None
    if with_oracle and indicator.length <= EXHAUSTIVE_MAX_LEN:
        oracle = exhaustive_barrier(J_loop, occupancy)
    return BarrierCertificate(
        indicator=indicator_id, length=indicator.length, occupancy=str(as_occupancy(occupancy)),
        barrier_value=barrier, threshold=threshold, passed=passes(barrier, threshold) and oracle_agrees(barrier, oracle),
        witness=sorted(float(j) for j in J_loop), links=list(indicator.links),
        oracle_value=oracle, heuristic=indicator.heuristic,
    )


@dataclass
class FamilyCertificate:
    occupancy: str
    Delta: float
    n_indicators: int
    n_failed: int
    min_ratio: float
    per_length: Dict[int, Dict[str, float]]

    @property
    def passed(self) -> bool:
        return self.n_failed == 0

    @property
    def measured_delta(self) -> float:
        """Largest Delta the family certifies: min over indicators of barrier / L_B."""
        return self.min_ratio


def family_barriers(J: np.ndarray, bs: BottleneckStructure, occupancy: Occupancy) -> Iterator[tuple]:
    """(length, rows, barriers) per indicator-length block, vectorized."""
    for n, rows in bs.indicator_rows():
        yield n, rows, worst_case_barrier(J[rows], occupancy)


def certify_family(H: ClassicalHamiltonian, bs: BottleneckStructure, occupancy: Occupancy = FULL,
                   Delta: Optional[float] = None) -> FamilyCertificate:
    Delta = _resolve_delta(bs, Delta)
    n_total = n_failed = 0
    min_ratio = math.inf
    per_length: Dict[int, Dict[str, float]] = {}
    for n, rows, barriers in family_barriers(H.J, bs, occupancy):
        threshold = Delta * n
        failed = int(np.count_nonzero(barriers < threshold - 1e-12 * max(1.0, abs(threshold))))
        n_total += len(rows)
        n_failed += failed
        min_ratio = min(min_ratio, float(barriers.min()) / n)
        per_length[n] = {'count': len(rows), 'failed': failed,
                         'min_barrier': float(barriers.min()), 'max_barrier': float(barriers.max())}
    cert = FamilyCertificate(occupancy=str(as_occupancy(occupancy)), Delta=Delta, n_indicators=n_total,
                             n_failed=n_failed, min_ratio=min_ratio, per_length=per_length)
    log = logger.info if cert.passed else logger.warning
    log(f"Barrier family at occupancy {cert.occupancy}: {n_total} indicators, {n_failed} failed, "
        f"min barrier/L_B={min_ratio:.6g}")
    return cert


def oracle_indicators(bs: BottleneckStructure, sample: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """Indicator ids short enough for the exhaustive oracle; a seeded subset of `sample` of them if given."""
    ids, ident = [], 0
    for n, rows in bs.indicator_rows():
        if n <= EXHAUSTIVE_MAX_LEN:
            ids.append(np.arange(ident, ident + len(rows)))
        ident += len(rows)
    eligible = np.concatenate(ids) if ids else np.zeros(0, dtype=np.int64)
    if sample is None or sample >= eligible.size:
        return eligible
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(eligible, size=int(sample), replace=False))


def iter_certificates(H: ClassicalHamiltonian, bs: BottleneckStructure, occupancy: Occupancy = FULL,
                      Delta: Optional[float] = None, failures_only: bool = False,
                      with_oracle: bool = False, oracle_sample: Optional[int] = None,
                      seed: int = 0) -> Iterator[BarrierCertificate]:
    """
    Certificates in indicator order. With the oracle on, the exhaustive
    barrier is computed for every short indicator, or for a seeded sample of
    `oracle_sample` of them; a disagreement fails the certificate. With
    failures_only, passing certificates are skipped unless the oracle ran.
    """
    Delta = _resolve_delta(bs, Delta)
    occ = str(as_occupancy(occupancy))
    checked = set(oracle_indicators(bs, oracle_sample, seed).tolist()) if with_oracle else set()
    ident = 0
    sampled_from = sum(len(r) for r in bs.indicator_table.values())
    for n, rows, barriers in family_barriers(H.J, bs, occupancy):
        for row, barrier in zip(rows, barriers):
            barrier = float(barrier)
            ok = passes(barrier, Delta * n)
            oracle = exhaustive_barrier(H.J[row], occupancy) if ident in checked else None
            agrees = oracle_agrees(barrier, oracle)
            if not agrees:
                logger.error(f"Indicator {ident}: oracle barrier {oracle:.12g} differs from worst case {barrier:.12g}")
            if not (failures_only and ok and oracle is None):
                yield BarrierCertificate(
                    indicator=ident, length=n, occupancy=occ, barrier_value=barrier,
                    threshold=Delta * n, passed=ok and agrees, witness=sorted(float(j) for j in H.J[row]),
                    links=[int(e) for e in row], oracle_value=oracle, heuristic=ident >= sampled_from,
                )
            ident += 1


def write_certificates(path: str, certificates: Iterable[BarrierCertificate], extra: Optional[Dict[str, Any]] = None) -> int:
    """JSON lines, one certificate per line, each carrying `extra` (e.g. the config hash)."""
    extra = extra or {}
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for cert in certificates:
            f.write(json.dumps({**extra, **cert.to_dict()}, ensure_ascii=False) + '\n')
            count += 1
    logger.info(f"Wrote {count} certificates to {path}")
    return count
