"""
Exact Gibbs tables over every basis state and the classical bottleneck bound.
"""

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np

from peierls_lab.classical.hamiltonian import ClassicalHamiltonian, energies_all
from peierls_lab.errors import BoundViolationError, StructureError
from peierls_lab.lattice.domain_walls import BOTTLENECK_1, basis_classification
from peierls_lab.lattice.loops import loop_table
from peierls_lab.lattice.spins import MAX_TABLE_SITES
from peierls_lab.peierls.structure import BottleneckStructure

logger = logging.getLogger(__name__)

THRESHOLD_NOTE = ("the exponent beta*Delta - theta is positive only for beta > theta/Delta; "
                  "that is the threshold applied here")


@dataclass(eq=False)
class GibbsTable:
    hamiltonian: ClassicalHamiltonian
    beta: float
    energies: np.ndarray
    probabilities: np.ndarray
    log_Z: float

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z) if self.log_Z < 700 else math.inf

    @property
    def F(self) -> float:
        """Free energy -log(Z)/beta; nan at beta = 0 and beta = inf."""
        if self.beta == 0 or math.isinf(self.beta):
            return math.nan
        return -self.log_Z / self.beta

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.lattice.n_sites

    def mass(self, mask: np.ndarray) -> float:
        return float(self.probabilities[mask].sum())

    def restricted(self, mask: np.ndarray) -> np.ndarray:
        """P restricted to the mask and renormalized."""
        p = np.where(mask, self.probabilities, 0.0)
        total = p.sum()
        if total <= 0:
            raise StructureError("restricted Gibbs state on a set of zero mass")
        return p / total


def boltzmann_weights(energies: np.ndarray, beta: float) -> Tuple[np.ndarray, float]:
    """Weights shifted by the ground energy, and log Z."""
    E0 = float(energies.min())
    dE = energies - E0
    if math.isinf(beta):
        w = np.isclose(dE, 0.0, atol=1e-12).astype(np.float64)
        return w, math.nan
    w = np.exp(-beta * dE)
    return w, -beta * E0 + math.log(w.sum())


def exact_gibbs(H: ClassicalHamiltonian, beta: float, budget: int = MAX_TABLE_SITES) -> GibbsTable:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    energies = energies_all(H, budget=budget)
    w, log_Z = boltzmann_weights(energies, beta)
    probs = w / w.sum()
    logger.debug(f"Gibbs table at beta={beta} over {len(probs)} states, log Z={log_Z}")
    return GibbsTable(hamiltonian=H, beta=float(beta), energies=energies, probabilities=probs, log_Z=log_Z)


def hamming_closure(mask: np.ndarray, n_sites: int) -> np.ndarray:
    """States one spin flip away from the mask and outside it."""
    idx = np.arange(mask.size, dtype=np.int64)
    near = np.zeros_like(mask)
    for i in range(n_sites):
        near |= mask[idx ^ (1 << i)]
    return near & ~mask


@dataclass
class WellSets:
    well: np.ndarray
    bottleneck: np.ndarray
    augmentation: int
    longest_loop: int


def well_sets(bs: BottleneckStructure, k: int) -> WellSets:
    """W_k and Phi_k = Bottleneck(k) plus the one-flip neighbours of W_k outside W_k."""
    if k not in (1, 2):
        raise StructureError(f"well index must be 1 or 2, got {k}")
    cls = basis_classification(bs)
    well = cls.tags == k
    tagged = cls.tags == (BOTTLENECK_1 + k - 1)
    closure = hamming_closure(well, bs.lattice.n_sites)
    phi = tagged | closure
    longest = int(cls.max_loop[phi].max()) if phi.any() else 0
    return WellSets(well=well, bottleneck=phi, augmentation=int((closure & ~tagged).sum()), longest_loop=longest)


@lru_cache(maxsize=32)
def _family_size(bs: BottleneckStructure, max_len: int) -> int:
    table = loop_table(bs.lattice, max_len, min_len=bs.L, budget=max(bs.loop_budget, max_len))
    return sum(len(rows) for rows in table.values())


def audited_theta(bs: BottleneckStructure, sets: WellSets) -> Tuple[float, int, int]:
    """theta = log|family| / L with the family covering every loop length met in Phi_k."""
    max_len = max(bs.L, min(sets.longest_loop, bs.loop_budget))
    if sets.longest_loop > bs.loop_budget:
        logger.warning(f"Bottleneck loops reach length {sets.longest_loop}; family truncated at {bs.loop_budget}")
    size = _family_size(bs, max_len)
    return math.log(size) / bs.L, size, max_len


@dataclass
class PeierlsFactor:
    beta: float
    Delta: float
    theta: float
    L: int
    exponent: float
    factor: float
    vacuous: bool

    @property
    def ratio(self) -> float:
        """x / (1 - x) with x = e^{-(beta Delta - theta) L}."""
        if self.vacuous:
            return math.inf
        return self.factor / (1.0 - self.factor)


def peierls_factor(beta: float, Delta: float, theta: float, L: int) -> PeierlsFactor:
    exponent = beta * Delta - theta
    vacuous = not exponent > 0
    factor = math.exp(-exponent * L) if not vacuous else 1.0
    if not vacuous and factor >= 1.0:
        vacuous = True
    return PeierlsFactor(beta=beta, Delta=Delta, theta=theta, L=L, exponent=exponent, factor=factor, vacuous=vacuous)


@dataclass
class BottleneckMass:
    k: int
    P_bottleneck: float
    P_well: float
    bound: float
    vacuous: bool
    holds: bool
    theta: float
    Delta: float
    n_indicators: int
    augmentation: int
    note: str = THRESHOLD_NOTE

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def resolve_bound_inputs(bs: BottleneckStructure, table_beta: float, k: int, Delta: Optional[float], theta: Optional[float]):
    if Delta is None:
        Delta = bs.Delta
    if Delta is None:
        raise StructureError("bottleneck bound needs Delta from a barrier certificate")
    sets = well_sets(bs, k)
    if theta is None:
        theta, size, _ = audited_theta(bs, sets)
    else:
        size = bs.n_indicators
    return sets, float(Delta), float(theta), size, peierls_factor(table_beta, float(Delta), float(theta), bs.L)


def bottleneck_mass(table: GibbsTable, bs: BottleneckStructure, k: int, Delta: Optional[float] = None,
                    theta: Optional[float] = None, certified: bool = True) -> BottleneckMass:
    """
    P(Phi_k) against e^{-(beta Delta - theta) L} / (1 - e^{-(beta Delta - theta) L}) * P(W_k).
    Raises BoundViolationError if the bound fails while certified and not vacuous.
    """
    sets, Delta, theta, size, pf = resolve_bound_inputs(bs, table.beta, k, Delta, theta)
    p_phi = table.mass(sets.bottleneck)
    p_well = table.mass(sets.well)
    bound = pf.ratio * p_well
    holds = p_phi <= bound
    result = BottleneckMass(k=k, P_bottleneck=p_phi, P_well=p_well, bound=bound, vacuous=pf.vacuous,
                            holds=holds, theta=theta, Delta=Delta, n_indicators=size,
                            augmentation=sets.augmentation)
    if pf.vacuous:
        logger.warning(f"beta*Delta - theta = {pf.exponent:.4g} <= 0 at beta={table.beta}; bound is vacuous")
    elif not holds and certified:
        raise BoundViolationError('bottleneck mass', p_phi, bound, {'beta': table.beta, 'k': k, 'theta': theta})
    return result
