"""
Single-spin-flip Metropolis dynamics: exact kernel actions on Gibbs tables
and Monte Carlo escape times from a well.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from peierls_lab.classical.couplings import philox_rng
from peierls_lab.classical.hamiltonian import ClassicalHamiltonian, energies_all
from peierls_lab.errors import BoundViolationError
from peierls_lab.gibbs.exact import GibbsTable, resolve_bound_inputs
from peierls_lab.lattice.domain_walls import BOTTLENECK_1, classify_config
from peierls_lab.peierls.structure import BottleneckStructure

logger = logging.getLogger(__name__)

ESCAPE_STREAM = 0xE5C


@dataclass(eq=False)
class MarkovKernel:
    """
    T(z' <- z) = (1/N) min(1, e^{-beta (H(z') - H(z))}) for z' one flip from z;
    the lazy variant holds with probability 1/2 before proposing.
    """
    hamiltonian: ClassicalHamiltonian
    beta: float
    lazy: bool = False

    def __post_init__(self):
        self._energies: Optional[np.ndarray] = None

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.lattice.n_sites

    @property
    def energies(self) -> np.ndarray:
        if self._energies is None:
            self._energies = energies_all(self.hamiltonian)
        return self._energies

    def acceptance(self, dE: np.ndarray) -> np.ndarray:
        dE = np.asarray(dE, dtype=np.float64)
        if math.isinf(self.beta):
            return np.where(dE <= 0, 1.0, 0.0)
        return np.minimum(1.0, np.exp(-self.beta * np.maximum(dE, 0.0)))

    @property
    def move_scale(self) -> float:
        return (0.5 if self.lazy else 1.0) / self.n_sites

    def flip_probabilities(self, site: int) -> np.ndarray:
        """T(z ^ bit_site <- z) for every basis state z."""
        E = self.energies
        idx = np.arange(E.size, dtype=np.int64)
        return self.move_scale * self.acceptance(E[idx ^ (1 << site)] - E)

    def entry(self, to: int, frm: int) -> float:
        diff = int(to) ^ int(frm)
        if diff == 0:
            return 1.0 - sum(self.entry(frm ^ (1 << i), frm) for i in range(self.n_sites))
        if diff & (diff - 1):
            return 0.0
        E = self.energies
        return float(self.move_scale * self.acceptance(E[to] - E[frm]))

    def apply(self, p: np.ndarray) -> np.ndarray:
        """(T p)(z') = sum_z T(z' <- z) p(z)."""
        p = np.asarray(p, dtype=np.float64)
        idx = np.arange(p.size, dtype=np.int64)
        out = p.copy()
        for i in range(self.n_sites):
            moved = p * self.flip_probabilities(i)
            out -= moved
            out[idx ^ (1 << i)] += moved
        return out


def detailed_balance_defect(kernel: MarkovKernel, table: GibbsTable) -> float:
    """max over single-flip pairs of |T(z'<-z) P(z) - T(z<-z') P(z')|."""
    P = table.probabilities
    idx = np.arange(P.size, dtype=np.int64)
    worst = 0.0
    for i in range(kernel.n_sites):
        fwd = kernel.flip_probabilities(i)
        other = idx ^ (1 << i)
        worst = max(worst, float(np.abs(fwd * P - fwd[other] * P[other]).max()))
    return worst


def stationarity_defect(kernel: MarkovKernel, table: GibbsTable) -> float:
    return float(np.abs(kernel.apply(table.probabilities) - table.probabilities).sum())


def flow_sum(kernel: MarkovKernel, restricted: np.ndarray, well: np.ndarray) -> float:
    """2 * sum over z in W, z' outside W of T(z' <- z) P^W(z)."""
    idx = np.arange(well.size, dtype=np.int64)
    total = 0.0
    for i in range(kernel.n_sites):
        leaving = well & ~well[idx ^ (1 << i)]
        total += float((kernel.flip_probabilities(i) * restricted)[leaving].sum())
    return 2.0 * total


@dataclass
class SteadyReport:
    k: int
    norm: float
    flow: float
    bound: float
    vacuous: bool
    holds: bool
    theta: float
    Delta: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def almost_steady_norm(kernel: MarkovKernel, table: GibbsTable, bs: BottleneckStructure, k: int,
                       Delta: Optional[float] = None, theta: Optional[float] = None,
                       certified: bool = True) -> SteadyReport:
    """||T P^W - P^W||_1 against 2 x / (1 - x), x = e^{-(beta Delta - theta) L}."""
    sets, Delta, theta, _, pf = resolve_bound_inputs(bs, table.beta, k, Delta, theta)
    restricted = table.restricted(sets.well)
    norm = float(np.abs(kernel.apply(restricted) - restricted).sum())
    flow = flow_sum(kernel, restricted, sets.well)
    bound = 2.0 * pf.ratio
    report = SteadyReport(k=k, norm=norm, flow=flow, bound=bound, vacuous=pf.vacuous,
                          holds=norm <= bound, theta=theta, Delta=Delta)
    if pf.vacuous:
        logger.warning(f"Almost-steady bound vacuous at beta={table.beta}")
    elif not report.holds and certified:
        raise BoundViolationError('almost-steady norm', norm, bound, {'beta': table.beta, 'k': k})
    return report


# ---------------------------------------------------------------------------
# Monte Carlo escape times
# ---------------------------------------------------------------------------

@dataclass
class EscapeHistogram:
    k: int
    beta: float
    times: np.ndarray
    censored: np.ndarray
    t_max: int

    @property
    def median(self) -> float:
        """Median exit time in sweeps; censored chains count as t_max."""
        return float(np.median(np.where(self.censored, self.t_max, self.times)))

    @property
    def median_censored(self) -> bool:
        return bool(self.censored.mean() >= 0.5)

    def rows(self) -> List[Dict[str, Any]]:
        bins = np.ceil(np.where(self.censored, self.t_max, self.times)).astype(int)
        out = []
        for flag in (False, True):
            sel = bins[self.censored == flag]
            for t, count in zip(*np.unique(sel, return_counts=True)):
                out.append({'t': int(t), 'count': int(count), 'censored_flag': int(flag)})
        return sorted(out, key=lambda r: (r['t'], r['censored_flag']))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows(), columns=['t', 'count', 'censored_flag'])

    def write_csv(self, path: str):
        self.to_frame().to_csv(path, index=False)


class _Chain:
    def __init__(self, kernel: MarkovKernel, bs: BottleneckStructure, k: int, rng: np.random.Generator):
        self.kernel = kernel
        self.H = kernel.hamiltonian
        self.bs = bs
        self.k = k
        self.rng = rng
        lat = self.H.lattice
        self.z = np.full(lat.n_sites, 1 if k == 1 else -1, dtype=np.int8)
        self.fields = self.H.site_fields()
        self.incident = [[(e, int(j) if int(i) == s else int(i)) for e in lat.site_edges[s]
                          for i, j in [lat.edge_sites[e]]] for s in range(lat.n_sites)]

    def delta_energy(self, s: int) -> float:
        zs = float(self.z[s])
        bonds = sum(float(self.H.J[e]) * zs * float(self.z[o]) for e, o in self.incident[s])
        return bonds - 2.0 * self.fields[s] * zs

    def inside(self, wells_only: bool = False) -> bool:
        tag = classify_config(self.z, self.bs).code
        if wells_only:
            return tag == self.k
        return tag in (self.k, BOTTLENECK_1 + self.k - 1)

    def step(self, wells_only: bool = False) -> bool:
        """One Metropolis attempt; returns True if the chain is still inside."""
        if self.kernel.lazy and self.rng.random() < 0.5:
            return True
        s = int(self.rng.integers(self.z.size))
        acc = float(self.kernel.acceptance(self.delta_energy(s)))
        if acc < 1.0 and self.rng.random() >= acc:
            return True
        self.z[s] *= -1
        if self.inside(wells_only):
            return True
        if wells_only:
            self.z[s] *= -1
        return False


def mc_escape_time(kernel: MarkovKernel, bs: BottleneckStructure, k: int, n_chains: int, t_max: int,
                   seed: int = 0, burn_in: int = 10) -> EscapeHistogram:
    """
    First exit time (in sweeps) from W_k u Phi_k for chains started from a
    restricted-Metropolis burn-in inside W_k; censored at t_max.
    """
    n = kernel.n_sites
    times = np.zeros(n_chains)
    censored = np.zeros(n_chains, dtype=bool)
    for c in range(n_chains):
        chain = _Chain(kernel, bs, k, philox_rng(seed, ESCAPE_STREAM, c))
        for _ in range(burn_in * n):
            chain.step(wells_only=True)
        for attempt in range(t_max * n):
            if not chain.step():
                times[c] = (attempt + 1) / n
                break
        else:
            times[c] = t_max
            censored[c] = True
    hist = EscapeHistogram(k=k, beta=kernel.beta, times=times, censored=censored, t_max=t_max)
    if censored.any():
        logger.warning(f"{int(censored.sum())}/{n_chains} escape chains censored at t_max={t_max}")
    logger.info(f"Escape times at beta={kernel.beta}: median {hist.median:.3g} sweeps")
    return hist
