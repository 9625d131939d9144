"""
Metastability checks: restricted versus full evolution of a local
observable, local simulatability of a region, and false-vacuum lifetimes.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.sparse import linalg as sparse_linalg

from peierls_lab.classical.hamiltonian import ClassicalHamiltonian, uniform_hamiltonian
from peierls_lab.dynamics.evolution import (DRIFT_SLACK, MaskedOperator, check_time_grid, diagonal_expectation,
                                            evolve_trajectory)
from peierls_lab.errors import BoundViolationError, BudgetExceededError, LatticeError
from peierls_lab.lattice.torus import TorusLattice
from peierls_lab.peierls.structure import BottleneckStructure
from peierls_lab.quantum.diagnostics import almost_eigen_residual, well_projectors
from peierls_lab.quantum.eigen import restricted_ground_state
from peierls_lab.quantum.model import (MAX_DENSE_SITES, QuantumModel, build_quantum_hamiltonian,
                                       order_parameter_diagonal, region_hamiltonian, tfim_model)

logger = logging.getLogger(__name__)

LIFETIME_THRESHOLD = 0.1
# operator norms of larger differences go through eigsh
DENSE_NORM_DIM = 1024
NORM_TOL = 1e-10


def box_region(lat: TorusLattice, B: Iterable[int], R: int) -> List[int]:
    """Sites within a box of half-width R (periodic) around any site of B."""
    B = [int(b) for b in B]
    out = []
    for s in range(lat.n_sites):
        x, y = lat.coords(s)
        for b in B:
            bx, by = lat.coords(b)
            dx = min((x - bx) % lat.Lx, (bx - x) % lat.Lx)
            dy = min((y - by) % lat.Ly, (by - y) % lat.Ly)
            if dx <= R and dy <= R:
                out.append(s)
                break
    return out


def block_magnetization(n_sites: int, B: Sequence[int]) -> np.ndarray:
    """O_B = (1/|B|) sum_{i in B} Z_i as a z-basis diagonal; ||O_B|| = 1."""
    return order_parameter_diagonal(n_sites, B)


def block_sites(lat: TorusLattice, origin: Tuple[int, int] = (0, 0), size: Tuple[int, int] = (2, 2)) -> List[int]:
    x0, y0 = origin
    return [lat.site(x0 + dx, y0 + dy) for dy in range(size[1]) for dx in range(size[0])]


@dataclass(eq=False)
class EvolutionJob:
    model: QuantumModel
    t_grid: np.ndarray
    B: Tuple[int, ...]
    R_B: Optional[int] = None
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t_grid = check_time_grid(self.t_grid)
        self.B = tuple(int(b) for b in self.B)
        if not self.B:
            raise LatticeError("observable block B is empty")
        if not set(self.B) <= set(range(self.model.n_sites)):
            raise LatticeError(f"block {self.B} leaves the lattice")
        if not set(self.B) <= set(self.region):
            raise LatticeError("region A must contain B")

    @property
    def region(self) -> List[int]:
        if self.R_B is None:
            return list(range(self.model.n_sites))
        return box_region(self.model.lattice, self.B, self.R_B)

    @property
    def is_full(self) -> bool:
        return len(self.region) == self.model.n_sites

    @property
    def observable(self) -> np.ndarray:
        return block_magnetization(self.model.n_sites, self.B)


@dataclass
class MetastabilityReport:
    k: int
    times: np.ndarray
    full: np.ndarray
    restricted: np.ndarray
    deviation: np.ndarray
    delta_LR: np.ndarray
    bound: np.ndarray
    delta: float
    delta_prime: float
    M: int
    region_size: int
    delta_LR_kind: str = 'exact'

    @property
    def holds(self) -> bool:
        return bool(np.all(self.deviation <= self.bound + DRIFT_SLACK))

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.times, 'observable': self.full, 'restricted': self.restricted,
                             'deviation': self.deviation, 'delta_LR': self.delta_LR, 'bound': self.bound})

    def summary(self) -> Dict[str, Any]:
        return {'k': self.k, 'M': self.M, 'delta': self.delta, 'delta_prime': self.delta_prime,
                'region_size': self.region_size, 'max_deviation': self.max_deviation,
                'max_delta_LR': float(self.delta_LR.max()), 'delta_LR_kind': self.delta_LR_kind, 'holds': self.holds}


def restricted_vs_full(job: EvolutionJob, k: int, bs: BottleneckStructure, M: int = 1, seed: int = 0,
                       assert_bound: bool = True) -> MetastabilityReport:
    """
    |<O_B>_H(t) - <O_B>_{P_k H_A P_k}(t)| against 8 t sqrt(M) delta + 4 sqrt(delta') + delta_LR(t),
    with delta, delta' and delta_LR all measured on the instance. delta_LR is
    the operator norm of the difference of the two Heisenberg-picture O_B
    within the dense budget.
    """
    model = job.model
    H = build_quantum_hamiltonian(model)
    H_A = H if job.is_full else region_hamiltonian(model, job.region)
    well = well_projectors(bs).well(k)

    if job.initial is None:
        psi = restricted_ground_state(H, well, seed=seed)[0].state
    else:
        psi = np.asarray(job.initial, dtype=np.complex128)
        psi = psi / np.linalg.norm(psi)

    # P^A_k: the M lowest eigenstates of P_k H_A P_k
    eig = restricted_ground_state(H_A, well, m=M, seed=seed)
    delta = max(float(np.linalg.norm(H_A.matvec(g.state) - g.energy * g.state)) for g in eig)
    captured = sum(abs(np.vdot(g.state, psi)) ** 2 for g in eig)
    delta_prime = max(0.0, 1.0 - float(captured))

    O = job.observable
    times = job.t_grid
    full = evolve_trajectory(psi, H, times, {'O': O}).values['O']
    restricted = evolve_trajectory(psi, MaskedOperator(H_A, well), times, {'O': O},
                                   energy_of=MaskedOperator(H_A, well)).values['O']
    if job.is_full:
        delta_LR, delta_LR_kind = np.zeros(times.size), 'exact'
    elif model.n_sites <= MAX_DENSE_SITES:
        delta_LR = heisenberg_distance(H.dense(MAX_DENSE_SITES), H_A.dense(MAX_DENSE_SITES), O, times)
        delta_LR_kind = 'operator'
    else:
        # above the dense budget only the expectation in psi is available
        local = evolve_trajectory(psi, H_A, times, {'O': O}).values['O']
        delta_LR, delta_LR_kind = np.abs(full - local), 'state'
        logger.warning(f"{model.n_sites} sites exceed the dense budget; delta_LR measured on the evolved state only")
    deviation = np.abs(full - restricted)
    bound = 8.0 * times * math.sqrt(len(eig)) * delta + 4.0 * math.sqrt(delta_prime) + delta_LR
    report = MetastabilityReport(k=k, times=times, full=full, restricted=restricted, deviation=deviation,
                                 delta_LR=delta_LR, bound=bound, delta=delta, delta_prime=delta_prime,
                                 M=len(eig), region_size=len(job.region), delta_LR_kind=delta_LR_kind)
    logger.info(f"Restricted vs full (k={k}, |A|={len(job.region)}): max deviation {report.max_deviation:.3e}, "
                f"delta={delta:.3e}, delta'={delta_prime:.3e}")
    if not report.holds:
        if assert_bound:
            worst = int(np.argmax(deviation - bound))
            raise BoundViolationError('restricted evolution', float(deviation[worst]), float(bound[worst]),
                                      {'t': float(times[worst]), 'k': k})
        logger.warning("Restricted-evolution bound fails on this instance")
    return report


def _hermitian_norm(apply, matrix_of, dim: int, seed: int = 0) -> float:
    if dim <= DENSE_NORM_DIM:
        return float(np.abs(linalg.eigvalsh(matrix_of())).max())
    op = sparse_linalg.LinearOperator((dim, dim), matvec=apply, dtype=np.complex128)
    v0 = np.random.default_rng(seed).standard_normal(dim).astype(np.complex128)
    return float(np.abs(sparse_linalg.eigsh(op, k=1, which='LM', v0=v0, tol=NORM_TOL,
                                            return_eigenvectors=False)).max())


def heisenberg_distance(H: np.ndarray, H_A: np.ndarray, O: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """
    ||e^{iHt} O e^{-iHt} - e^{iH_A t} O e^{-iH_A t}|| at every t, for dense
    Hermitian H, H_A and a z-diagonal O. Both Hamiltonians are diagonalized
    once; the difference is taken in the eigenbasis of H.
    """
    O = np.asarray(O, dtype=np.float64)
    vals1, vecs1 = linalg.eigh(H)
    vals2, vecs2 = linalg.eigh(H_A)
    W1 = vecs1.conj().T @ (O[:, None] * vecs1)
    W2 = vecs2.conj().T @ (O[:, None] * vecs2)
    Q = vecs1.conj().T @ vecs2
    del vecs1, vecs2
    dim = H.shape[0]
    out = np.zeros(len(times))
    for i, t in enumerate(times):
        if t == 0:
            continue
        p1 = np.exp(1j * vals1 * t)
        p2 = np.exp(1j * vals2 * t)

        def apply(x, p1=p1, p2=p2):
            x = np.ravel(x)
            inner = p2 * (W2 @ (p2.conj() * (Q.conj().T @ x)))
            return p1 * (W1 @ (p1.conj() * x)) - Q @ inner

        def matrix_of(p1=p1, p2=p2):
            return (np.outer(p1, p1.conj()) * W1) - Q @ (np.outer(p2, p2.conj()) * W2) @ Q.conj().T

        out[i] = _hermitian_norm(apply, matrix_of, dim)
    return out


def local_simulatability_error(model: QuantumModel, B: Sequence[int], R_B: int, t: float,
                               budget: int = MAX_DENSE_SITES) -> float:
    """||e^{iHt} O_B e^{-iHt} - e^{iH_A t} O_B e^{-iH_A t}|| for A the box of half-width R_B around B."""
    n = model.n_sites
    if n > budget:
        raise BudgetExceededError("dense evolution", n, budget, hint="sites; use a smaller chain or lattice")
    region = box_region(model.lattice, B, R_B)
    if t == 0:
        return 0.0
    H = build_quantum_hamiltonian(model).dense(budget)
    H_A = region_hamiltonian(model, region).dense(budget)
    value = float(heisenberg_distance(H, H_A, block_magnetization(n, B), [t])[0])
    logger.info(f"delta_LR(R_B={R_B}, t={t:g}) = {value:.4e} with |A|={len(region)}")
    return value


def ring_model(n_sites: int = 10, eps: float = 1.0, J: float = 1.0) -> QuantumModel:
    """Transverse-field chain on a periodic ring of n sites."""
    return tfim_model(uniform_hamiltonian(TorusLattice(n_sites, 1), J), eps)


# ---------------------------------------------------------------------------
# false vacuum
# ---------------------------------------------------------------------------

@dataclass
class LifetimeReport:
    h: float
    times: np.ndarray
    values: np.ndarray
    drift: np.ndarray
    lifetime: float
    censored: bool
    delta: float
    bound: np.ndarray = field(repr=False, default=None)

    @property
    def within_bound(self) -> bool:
        return bool(np.all(self.drift <= self.bound + DRIFT_SLACK))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.times, 'observable': self.values, 'drift': self.drift, 'bound': self.bound,
                             'h': self.h})

    def summary(self) -> Dict[str, Any]:
        return {'h': self.h, 'lifetime': self.lifetime, 'censored': self.censored, 'delta': self.delta,
                'max_drift': float(self.drift.max()), 'within_bound': self.within_bound}


def lifetime_from_drift(times: np.ndarray, drift: np.ndarray, threshold: float = LIFETIME_THRESHOLD) -> Tuple[float, bool]:
    """First grid time with drift above threshold; (t_max, True) when never reached."""
    above = np.flatnonzero(drift > threshold)
    if above.size:
        return float(times[above[0]]), False
    return float(times[-1]), True


def false_vacuum_point(lat: TorusLattice, h: float, eps: float, bs: BottleneckStructure, t_grid: Sequence[float],
                       J: float = 1.0, block: Optional[Sequence[int]] = None, threshold: float = LIFETIME_THRESHOLD,
                       seed: int = 0, classical: Optional[ClassicalHamiltonian] = None) -> LifetimeReport:
    """
    Start from the ground state of P_2 H P_2 with a field h favouring well 1
    and follow the block magnetization under the full H.
    """
    if classical is None:
        classical = uniform_hamiltonian(lat, J, h_long=h)
    else:
        classical = ClassicalHamiltonian(classical.couplings, h_long=h, h_stag=classical.h_stag)
    model = tfim_model(classical, eps)
    H = build_quantum_hamiltonian(model)
    psi = restricted_ground_state(H, well_projectors(bs).well(2), seed=seed)[0].state
    O = block_magnetization(lat.n_sites, block if block is not None else block_sites(lat))
    times = check_time_grid(t_grid)
    values = evolve_trajectory(psi, H, times, {'O': O}).values['O']
    drift = np.abs(values - diagonal_expectation(psi, O))
    lifetime, censored = lifetime_from_drift(times, drift, threshold)
    delta = almost_eigen_residual(H, psi)
    report = LifetimeReport(h=float(h), times=times, values=values, drift=drift, lifetime=lifetime,
                            censored=censored, delta=delta, bound=2.0 * delta * times)
    if censored:
        logger.warning(f"False vacuum at h={h:g} did not decay by t={times[-1]:g}; lifetime censored")
    else:
        logger.info(f"False vacuum at h={h:g}: lifetime {lifetime:g}")
    return report


def _lifetime_task(args) -> LifetimeReport:
    lat, h, eps, bs, t_grid, J, block, threshold, seed = args
    return false_vacuum_point(lat, h, eps, bs, t_grid, J=J, block=block, threshold=threshold, seed=seed)


def false_vacuum_lifetime(lat: TorusLattice, hs: Sequence[float], eps: float, bs: BottleneckStructure,
                          t_grid: Sequence[float], J: float = 1.0, block: Optional[Sequence[int]] = None,
                          threshold: float = LIFETIME_THRESHOLD, seed: int = 0, jobs: int = 1) -> List[LifetimeReport]:
    """Lifetime per field value; all points share the same seed."""
    tasks = [(lat, float(h), eps, bs, list(t_grid), J, block, threshold, seed) for h in hs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_lifetime_task, tasks))
    else:
        reports = [_lifetime_task(t) for t in tasks]
    if not lifetimes_monotone(reports):
        logger.warning("Lifetimes are not monotone in 1/h across the sweep")
    return reports


def lifetimes_monotone(reports: Sequence[LifetimeReport]) -> bool:
    """T(h) non-increasing as h grows."""
    ordered = sorted(reports, key=lambda r: r.h)
    return all(a.lifetime >= b.lifetime for a, b in zip(ordered, ordered[1:]))
