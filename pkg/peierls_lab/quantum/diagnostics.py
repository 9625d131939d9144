"""
Diagonal projectors on the z basis and the quantum bottleneck diagnostics
built from them.

Every projector here (wells, bottlenecks, loop indicators, excitation
windows) is a boolean mask over basis indices, so applying it to a state is
an elementwise product.
"""

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from peierls_lab.errors import LatticeError
from peierls_lab.lattice.domain_walls import BOTTLENECK_1, OUT, WELL_1, WELL_2, basis_classification
from peierls_lab.lattice.loops import DWLoop
from peierls_lab.lattice.torus import TorusLattice
from peierls_lab.peierls.structure import BottleneckStructure
from peierls_lab.quantum.model import MAX_DENSE_SITES, QuantumHamiltonian, QuantumModel

logger = logging.getLogger(__name__)

MAX_PACKED_EDGES = 63


@lru_cache(maxsize=4)
def excitation_bits(lat: TorusLattice) -> np.ndarray:
    """Per basis state, a bitmask of the edges that carry a domain wall."""
    if lat.n_edges > MAX_PACKED_EDGES:
        raise LatticeError(f"{lat.n_edges} edges do not fit one 64-bit syndrome word")
    idx = np.arange(1 << lat.n_sites, dtype=np.int64)
    bits = np.zeros(idx.size, dtype=np.int64)
    for e, (i, j) in enumerate(lat.edge_sites):
        bits |= (((idx >> int(i)) ^ (idx >> int(j))) & 1) << e
    return bits


def link_mask(links: Iterable[int]) -> int:
    return sum(1 << int(e) for e in set(links))


def loop_projector(lat: TorusLattice, gamma: DWLoop) -> np.ndarray:
    """Basis states whose syndrome is 1 on every link of gamma."""
    mask = np.int64(link_mask(gamma.links))
    return (excitation_bits(lat) & mask) == mask


def loop_excitations(lat: TorusLattice, gamma: DWLoop) -> np.ndarray:
    """E_B: number of excited links of gamma in every basis state."""
    bits = excitation_bits(lat)
    count = np.zeros(bits.size, dtype=np.int16)
    for e in gamma.links:
        count += ((bits >> int(e)) & 1).astype(np.int16)
    return count


def dw_projector_weight(psi: np.ndarray, gamma: DWLoop, lat: TorusLattice) -> float:
    """||P_gamma psi||."""
    return float(np.sqrt(np.sum(np.abs(psi[loop_projector(lat, gamma)]) ** 2)))


@dataclass
class WellProjectors:
    well_1: np.ndarray
    well_2: np.ndarray
    bottleneck_1: np.ndarray
    bottleneck_2: np.ndarray
    out: np.ndarray

    def well(self, k: int) -> np.ndarray:
        return self.well_1 if k == 1 else self.well_2

    def bottleneck(self, k: int) -> np.ndarray:
        return self.bottleneck_1 if k == 1 else self.bottleneck_2


def well_projectors(bs: BottleneckStructure) -> WellProjectors:
    tags = basis_classification(bs).tags
    return WellProjectors(well_1=tags == WELL_1, well_2=tags == WELL_2, bottleneck_1=tags == BOTTLENECK_1,
                          bottleneck_2=tags == BOTTLENECK_1 + 1, out=tags == OUT)


def weight(psi: np.ndarray, mask: np.ndarray) -> float:
    """||P psi||^2 for a diagonal mask."""
    return float(np.sum(np.abs(psi[mask]) ** 2))


# ---------------------------------------------------------------------------
# E_B windows
# ---------------------------------------------------------------------------

@dataclass
class BnDecomposition:
    indicator: DWLoop
    window: int
    n_star: int
    amplitudes: np.ndarray
    occupancies: np.ndarray
    ratios: List[float]
    ceiling: Optional[float]
    decay_holds: Optional[bool]
    A1_bound: Optional[float]

    @property
    def L_B(self) -> int:
        return self.indicator.length

    def to_dict(self) -> Dict[str, Any]:
        return {
            'L_B': self.L_B, 'window': self.window, 'n_star': self.n_star,
            'amplitudes': [float(a) for a in self.amplitudes],
            'ratios': [float(r) for r in self.ratios],
            'ceiling': self.ceiling, 'decay_holds': self.decay_holds, 'A1_bound': self.A1_bound,
            'A1_holds': None if self.A1_bound is None else bool(self.amplitudes[0] <= self.A1_bound),
        }


def window_index(E_B: np.ndarray, L_B: int, width: int, n_star: int) -> np.ndarray:
    """
    1-based window of each excitation count: window n holds
    L_B - n*width < E_B <= L_B - (n-1)*width for n <= n_star, the last one the rest.
    """
    n = (L_B - E_B) // width + 1
    return np.minimum(n, n_star + 1)


def eb_decomposition(psi: np.ndarray, B: DWLoop, model: QuantumModel, L_override: Optional[int] = None,
                     bs: Optional[BottleneckStructure] = None, Delta: Optional[float] = None) -> BnDecomposition:
    """Amplitudes A_n of psi in windows of width qg of the excitation count of B."""
    L = L_override or (bs.L if bs is not None else B.length)
    width = model.q * model.g
    if width < 1:
        raise ValueError("window width qg is zero; the model has no perturbation terms")
    n_star = L // (5 * width) + 1
    E_B = loop_excitations(model.lattice, B)
    win = window_index(E_B.astype(np.int64), B.length, width, n_star)
    probs = np.abs(psi) ** 2
    occ = np.bincount(win - 1, weights=probs, minlength=n_star + 1)[:n_star + 1]
    amps = np.sqrt(occ)

    ratios: List[float] = []
    for n in range(n_star):
        if amps[n + 1] > 0:
            ratios.append(float(amps[n] / amps[n + 1]))
        else:
            ratios.append(math.inf if amps[n] > 0 else math.nan)

    ceiling = decay = a1 = None
    if Delta is not None and Delta > 0:
        ceiling = 3.0 * model.g * model.eps / Delta
        decay = bool(all(amps[n] <= ceiling * amps[n + 1] + 1e-14 for n in range(n_star)))
        a1 = ceiling ** n_star
    return BnDecomposition(indicator=B, window=width, n_star=n_star, amplitudes=amps, occupancies=occ,
                           ratios=ratios, ceiling=ceiling, decay_holds=decay, A1_bound=a1)


def excitation_floor_mask(lat: TorusLattice, B: DWLoop, min_excited: int) -> np.ndarray:
    """Q_{B,>=n}: basis states with at least `min_excited` excited links of B."""
    return loop_excitations(lat, B) >= min_excited


def almost_eigen_residual(H: QuantumHamiltonian, psi: np.ndarray, E: Optional[float] = None) -> float:
    """||(H - E) psi|| / ||psi||, with E = <H> when not given."""
    norm = float(np.linalg.norm(psi))
    if norm == 0:
        raise ValueError("residual of the zero vector")
    Hpsi = H.matvec(psi)
    if E is None:
        E = float(np.real(np.vdot(psi, Hpsi))) / norm ** 2
    return float(np.linalg.norm(Hpsi - E * psi)) / norm


# ---------------------------------------------------------------------------
# truncated symmetry, theorem window, union bound
# ---------------------------------------------------------------------------

@dataclass
class SymmetryShift:
    estimate: float
    exact: Optional[float]
    boundary_sites: List[int]
    bound: float
    locally_symmetric: bool
    holds: Optional[bool]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _flip_operator(n_sites: int, sites: Sequence[int]) -> np.ndarray:
    mask = sum(1 << s for s in sites)
    return np.arange(1 << n_sites) ^ mask


def truncated_symmetry_shift(model: QuantumModel, A: Iterable[int], exact: bool = True) -> SymmetryShift:
    """
    ||l_A V l_A - V|| with l_A the product of X over A, bounded term-wise by
    sum_F ||X_{F n A} V_F X_{F n A} - V_F||.
    """
    region = set(int(s) for s in A)
    if not region <= set(range(model.n_sites)):
        raise LatticeError("region A leaves the lattice")
    estimate = 0.0
    boundary = set()
    for t in model.terms:
        inside = region & set(t.support)
        if inside and inside != set(t.support):
            boundary |= inside
        if inside:
            estimate += float(np.linalg.norm(t.conjugated_by_flips(inside) - t.matrix, ord=2))
    sym = model.locally_symmetric
    bound = 2.0 * len(boundary) * model.eps
    exact_value = None
    if exact and model.n_sites <= MAX_DENSE_SITES:
        V = QuantumHamiltonian(model.n_sites, np.zeros(1 << model.n_sites), model.terms).dense()
        perm = _flip_operator(model.n_sites, sorted(region))
        exact_value = float(np.linalg.norm(V[np.ix_(perm, perm)] - V, ord=2))
    holds = (estimate <= bound + 1e-12) if sym else None
    if not sym:
        logger.warning("Perturbation is not locally symmetric; symmetry-shift bound reported, not asserted")
    return SymmetryShift(estimate=estimate, exact=exact_value, boundary_sites=sorted(boundary), bound=bound,
                         locally_symmetric=sym, holds=holds)


@dataclass
class TheoremWindow:
    zeta: float
    inside: bool
    ceiling: float
    n_star: int
    qg: int
    eps: float
    Delta: float
    theta: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def theorem_window(model: QuantumModel, Delta: float, theta: float, L: int) -> TheoremWindow:
    """zeta = 3 g eps e^{(5/2) q g theta} / Delta; the perturbative statements are theorems for 0 < zeta < 1."""
    qg = model.q * model.g
    eps = model.eps
    zeta = 3.0 * model.g * eps * math.exp(2.5 * qg * theta) / Delta if Delta > 0 else math.inf
    inside = 0.0 < zeta < 1.0
    window = TheoremWindow(zeta=zeta, inside=inside, ceiling=3.0 * model.g * eps / Delta if Delta > 0 else math.inf,
                           n_star=L // (5 * qg) + 1 if qg else 0, qg=qg, eps=eps, Delta=Delta, theta=theta)
    if not inside:
        logger.warning(f"zeta = {zeta:.4g} is outside (0, 1); inequality checks are reported, not asserted")
    return window


@dataclass
class UnionBound:
    k: int
    indicator_sum: float
    bottleneck_weight: float
    n_indicators: int

    @property
    def holds(self) -> bool:
        return self.indicator_sum >= self.bottleneck_weight - 1e-12

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['holds'] = self.holds
        return data


def union_bound_check(psi: np.ndarray, bs: BottleneckStructure, k: int) -> UnionBound:
    """sum_B ||B psi||^2 over the indicator family against ||Phi_k psi||^2."""
    bits = excitation_bits(bs.lattice)
    probs = np.abs(psi) ** 2
    total = 0.0
    count = 0
    for _, rows in bs.indicator_rows():
        for row in rows:
            m = np.int64(link_mask(row))
            total += float(probs[(bits & m) == m].sum())
            count += 1
    phi = weight(psi, well_projectors(bs).bottleneck(k))
    result = UnionBound(k=k, indicator_sum=total, bottleneck_weight=phi, n_indicators=count)
    if not result.holds:
        logger.warning(f"Union bound fails: sum_B ||B psi||^2 = {total:.3e} < ||Phi psi||^2 = {phi:.3e}")
    return result
