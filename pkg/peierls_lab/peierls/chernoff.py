"""
Chernoff criterion for random-bond disorder and its Monte Carlo check.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from peierls_lab.classical.couplings import DistributionSpec, sample_couplings
from peierls_lab.errors import DistributionError
from peierls_lab.lattice.torus import TorusLattice
from peierls_lab.peierls.barrier import FOUR_FIFTHS, Occupancy, worst_case_barrier
from peierls_lab.peierls.structure import BottleneckStructure

logger = logging.getLogger(__name__)


def chernoff_rate(a: float, p: float) -> float:
    """chi = a log(a/p) - a + p; the a -> 0 limit is p."""
    if a < 0 or p <= 0:
        return math.nan
    if a == 0:
        return p
    return a * math.log(a / p) - a + p


@dataclass
class ChernoffReport:
    p: float
    Delta: float
    Delta_prime: float
    J1: float
    J2: float
    a: float
    chi: float
    theta: Optional[float]
    L: Optional[int]
    bound: Optional[float]
    valid: bool
    note: str = ''

    def bound_at(self, L: int) -> float:
        """e^{-(chi-theta)L} / (1 - e^{-(chi-theta)}); inf when the exponent is not positive."""
        theta = self.theta or 0.0
        gap = self.chi - theta
        if not self.a > self.p or not gap > 0:
            return math.inf
        return math.exp(-gap * L) / (1.0 - math.exp(-gap))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def chernoff_parameters(p: float, Delta: float, Delta_prime: float, J1: float, J2: float,
                        theta: Optional[float] = None, L: Optional[int] = None) -> ChernoffReport:
    if not (0 <= J1 < Delta < Delta_prime < J2):
        raise DistributionError(
            f"need 0 <= J1 < Delta < Delta' < J2, got J1={J1}, Delta={Delta}, Delta'={Delta_prime}, J2={J2}"
        )
    if not 0 < p < 1:
        raise DistributionError(f"p must lie in (0, 1), got {p}")
    a = (4 * Delta_prime - 5 * Delta - J2) / (5 * (Delta_prime + J1))
    chi = chernoff_rate(a, p) if a >= 0 else math.nan
    notes = []
    if not a > p:
        notes.append(f"a={a:.6g} <= p={p}: Chernoff exponent is not positive")
    if theta is not None and not chi > theta:
        notes.append(f"chi={chi:.6g} <= theta={theta:.6g}: bound is vacuous")
    valid = a > p and (theta is None or chi > theta)
    report = ChernoffReport(p=p, Delta=Delta, Delta_prime=Delta_prime, J1=J1, J2=J2, a=a, chi=chi,
                            theta=theta, L=L, bound=None, valid=valid, note='; '.join(notes))
    if L is not None:
        report.bound = report.bound_at(L)
    if not valid:
        logger.warning(f"Chernoff criterion not met: {report.note}")
    return report


def union_bound_rate(report: ChernoffReport, counts: Dict[int, int]) -> float:
    """sum over lengths of N_l e^{-chi l} with the actual indicator counts."""
    if not report.a > report.p:
        return math.inf
    return float(sum(n * math.exp(-report.chi * length) for length, n in counts.items()))


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + confidence / 2))
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ViolationRate:
    n_samples: int
    n_violations: int
    rate: float
    interval: Tuple[float, float]
    Delta: float
    occupancy: str
    heuristic: bool

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['interval'] = list(self.interval)
        return data


def realization_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _count_violations(args) -> int:
    spec, lat, blocks, Delta, occupancy, seed, indices = args
    violations = 0
    for i in indices:
        J = sample_couplings(spec, lat, seed=realization_seed(seed, i)).J
        for n, rows in blocks:
            if np.any(worst_case_barrier(J[rows], occupancy) < Delta * n - 1e-12):
                violations += 1
                break
    return violations


def empirical_violation_rate(spec: DistributionSpec, lat: TorusLattice, bs: BottleneckStructure, Delta: float,
                             n_samples: int, seed: int = 0, occupancy: Occupancy = FOUR_FIFTHS,
                             jobs: int = 1) -> ViolationRate:
    """Fraction of disorder realizations where some indicator fails its barrier."""
    if n_samples < 1:
        raise DistributionError(f"n_samples must be >= 1, got {n_samples}")
    blocks: List[Tuple[int, np.ndarray]] = list(bs.indicator_rows())
    chunks = [list(c) for c in np.array_split(np.arange(n_samples), max(1, jobs)) if len(c)]
    tasks = [(spec, lat, blocks, float(Delta), occupancy, seed, c) for c in chunks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            k = sum(pool.map(_count_violations, tasks))
    else:
        k = sum(_count_violations(t) for t in tasks)
    result = ViolationRate(n_samples=n_samples, n_violations=k, rate=k / n_samples,
                           interval=wilson_interval(k, n_samples), Delta=float(Delta),
                           occupancy=str(occupancy), heuristic=bs.heuristic)
    logger.info(f"Violation rate {result.rate:.4f} ({k}/{n_samples}), 95% interval {result.interval}")
    return result
