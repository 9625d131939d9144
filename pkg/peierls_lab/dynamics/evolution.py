"""
Real-time evolution psi(t) = e^{-iHt} psi by Lanczos-Krylov steps, and the
observable drift of almost eigenstates.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import eigh_tridiagonal

from peierls_lab.errors import BoundViolationError, EvolutionError, StructureError
from peierls_lab.quantum.diagnostics import almost_eigen_residual

logger = logging.getLogger(__name__)

KRYLOV_DIM = 30
KRYLOV_TOL = 1e-10
MIN_STEP = 1e-12
NORM_TOL = 1e-8
DRIFT_SLACK = 1e-8
# sector parts lighter than this are dropped
SECTOR_FLOOR = 1e-14


class MaskedOperator:
    """P H P for a diagonal mask P; states outside the mask are left unchanged by evolution."""

    def __init__(self, H, mask: np.ndarray):
        self.H = H
        self.mask = np.asarray(mask, dtype=bool)
        self.dim = H.dim

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return np.where(self.mask, self.H.matvec(np.where(self.mask, v, 0)), 0)


class SparseOperator:
    """A CSR matrix behind the matvec interface evolve uses."""

    def __init__(self, matrix):
        self.matrix = matrix.tocsr()
        self.dim = self.matrix.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


@dataclass
class SectorPart:
    parity: int
    weight: float
    state: np.ndarray
    operator: SparseOperator


class SectorPropagator:
    """
    Splits a state into its X_tot = +1 and -1 parts and evolves each inside
    its own sector, where the Hamiltonian is a matrix of half the dimension.
    Needs a Hamiltonian that commutes with the global flip.
    """

    def __init__(self, H, psi: np.ndarray, **kwargs):
        if not getattr(H, 'symmetric', False):
            raise StructureError("sector evolution needs a Hamiltonian that commutes with the global flip")
        self.H = H
        self.kwargs = kwargs
        self.parts: List[SectorPart] = []
        for parity in (1, -1):
            v = H.sector_project(psi, parity)
            w = float(np.linalg.norm(v))
            if w > SECTOR_FLOOR:
                self.parts.append(SectorPart(parity, w, v / w, SparseOperator(H.sector_sparse(parity))))

    def advance(self, dt: float):
        for part in self.parts:
            part.state = evolve(part.state, part.operator, dt, **self.kwargs)

    def state(self) -> np.ndarray:
        full = np.zeros(self.H.dim, dtype=np.complex128)
        for part in self.parts:
            full += part.weight * self.H.sector_embed(part.state, part.parity)
        return full

    def energy(self) -> float:
        return float(sum(part.weight ** 2 * np.real(np.vdot(part.state, part.operator.matvec(part.state)))
                         for part in self.parts))


def _lanczos(H, v: np.ndarray, m: int):
    """Orthonormal Krylov basis (rows), tridiagonal coefficients and the residual norm beta_m."""
    n0 = np.linalg.norm(v)
    V = np.zeros((m, v.size), dtype=np.complex128)
    V[0] = v / n0
    alpha: List[float] = []
    beta: List[float] = []
    for j in range(m):
        w = H.matvec(V[j])
        a = float(np.real(np.vdot(V[j], w)))
        alpha.append(a)
        # one Gram-Schmidt pass against the whole basis
        w = w - V[:j + 1].T @ (V[:j + 1].conj() @ w)
        b = float(np.linalg.norm(w))
        if b < 1e-12 * max(1.0, abs(a)):
            return V[:j + 1], np.array(alpha), np.array(beta), 0.0
        if j + 1 < m:
            V[j + 1] = w / b
            beta.append(b)
        else:
            return V, np.array(alpha), np.array(beta), b
    return V, np.array(alpha), np.array(beta), 0.0


def evolve(psi: np.ndarray, H, t: float, krylov_dim: int = KRYLOV_DIM, tol: float = KRYLOV_TOL) -> np.ndarray:
    """
    e^{-iHt} psi with adaptive substeps: a step of size tau is accepted when
    beta_m |c_m(tau)| is below tol, otherwise tau is halved.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    norm0 = float(np.linalg.norm(psi))
    if abs(norm0 - 1.0) > NORM_TOL:
        raise EvolutionError(f"evolve needs a normalized state, got norm {norm0:.12g}")
    if t == 0:
        return psi.copy()
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    tau = remaining
    state = psi
    steps = 0
    while remaining > 0:
        V, alpha, beta, b_last = _lanczos(H, state, min(krylov_dim, state.size))
        if len(alpha) == 1:
            theta, S = alpha, np.ones((1, 1))
        else:
            theta, S = eigh_tridiagonal(alpha, beta)
        tau = min(tau * 2.0, remaining) if steps else min(tau, remaining)
        while True:
            coeff = S @ (np.exp(-1j * sign * theta * tau) * S[0].conj())
            err = b_last * abs(coeff[-1])
            if err <= tol:
                break
            tau /= 2.0
            if tau < MIN_STEP:
                raise EvolutionError(f"Krylov step underflow at tau={tau:.3e} (error estimate {err:.3e})")
        state = np.linalg.norm(state) * (V.T @ coeff)
        remaining -= tau
        steps += 1
        if remaining < MIN_STEP:
            remaining = 0.0
    norm = float(np.linalg.norm(state))
    if abs(norm - 1.0) > NORM_TOL:
        raise EvolutionError(f"norm drifted to {norm:.12g} over {steps} Krylov steps")
    logger.debug(f"Evolved to t={t:g} in {steps} Krylov steps")
    return state


@dataclass
class Trajectory:
    times: np.ndarray
    values: Dict[str, np.ndarray]
    energies: np.ndarray
    states: Optional[List[np.ndarray]] = None

    @property
    def energy_drift(self) -> float:
        return float(np.abs(self.energies - self.energies[0]).max())

    def to_frame(self) -> pd.DataFrame:
        data = {'t': self.times}
        data.update(self.values)
        return pd.DataFrame(data)


def diagonal_expectation(psi: np.ndarray, observable: np.ndarray) -> float:
    return float(np.sum(np.abs(psi) ** 2 * observable))


def check_time_grid(t_grid: Sequence[float]) -> np.ndarray:
    times = np.asarray(t_grid, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("time grid must be a non-empty 1d sequence")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must start at t >= 0 and be strictly increasing")
    return times


def evolve_trajectory(psi: np.ndarray, H, t_grid: Sequence[float], observables: Optional[Dict[str, np.ndarray]] = None,
                      keep_states: bool = False, energy_of=None, sectors: Optional[bool] = None,
                      **kwargs) -> Trajectory:
    """
    Sequential propagation through the grid, recording z-diagonal observables
    and the energy <H> (or <energy_of> if given) at every grid point.

    With sectors (the default whenever H commutes with the global flip) the
    even and odd parts are evolved separately as sparse sector matrices.
    """
    times = check_time_grid(t_grid)
    observables = observables or {}
    if sectors is None:
        sectors = energy_of is None and bool(getattr(H, 'symmetric', False)) and hasattr(H, 'sector_sparse')
    E_op = energy_of or H
    values = {name: np.zeros(times.size) for name in observables}
    energies = np.zeros(times.size)
    states: List[np.ndarray] = []
    state = np.asarray(psi, dtype=np.complex128)
    norm0 = float(np.linalg.norm(state))
    if abs(norm0 - 1.0) > NORM_TOL:
        raise EvolutionError(f"evolve needs a normalized state, got norm {norm0:.12g}")
    propagator = SectorPropagator(H, state, **kwargs) if sectors else None
    now = 0.0
    for i, t in enumerate(times):
        if propagator is not None:
            propagator.advance(t - now)
            state = propagator.state()
            energies[i] = propagator.energy()
        else:
            state = evolve(state, H, t - now, **kwargs)
            energies[i] = float(np.real(np.vdot(state, E_op.matvec(state))))
        now = t
        for name, obs in observables.items():
            values[name][i] = diagonal_expectation(state, obs)
        if keep_states:
            states.append(state.copy())
    traj = Trajectory(times=times, values=values, energies=energies, states=states if keep_states else None)
    if traj.energy_drift > 1e-8:
        logger.warning(f"Energy drifted by {traj.energy_drift:.3e} over the trajectory")
    return traj


@dataclass
class DriftReport:
    times: np.ndarray
    drift: np.ndarray
    bound: np.ndarray
    delta: float
    norm_A: float
    values: np.ndarray
    notes: List[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return bool(np.all(self.drift <= self.bound + DRIFT_SLACK))

    @property
    def max_excess(self) -> float:
        return float(np.max(self.drift - self.bound))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.times, 'observable': self.values, 'drift': self.drift, 'bound': self.bound})

    def write_csv(self, path: str, config_hash: Optional[str] = None):
        frame = self.to_frame()
        if config_hash:
            frame['config_hash'] = config_hash
        frame.to_csv(path, index=False)


def observable_drift(psi: np.ndarray, H, A_obs: np.ndarray, t_grid: Sequence[float], E: Optional[float] = None,
                     assert_bound: bool = True, **kwargs) -> DriftReport:
    """
    |<A(t)> - <A(0)>| against 2 ||A|| delta t, delta = ||(H - E) psi|| with
    E = <H> unless given. A is diagonal in the z basis.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    A_obs = np.asarray(A_obs, dtype=np.float64)
    delta = almost_eigen_residual(H, psi, E)
    norm_A = float(np.abs(A_obs).max())
    times = check_time_grid(t_grid)
    traj = evolve_trajectory(psi, H, times, {'A': A_obs}, **kwargs)
    start = diagonal_expectation(psi, A_obs)
    drift = np.abs(traj.values['A'] - start)
    bound = 2.0 * norm_A * delta * times
    report = DriftReport(times=times, drift=drift, bound=bound, delta=delta, norm_A=norm_A, values=traj.values['A'])
    if not report.holds:
        if assert_bound:
            raise BoundViolationError('observable drift', float(drift.max()), float(bound[np.argmax(drift - bound)]),
                                      {'delta': delta})
        logger.warning(f"Drift exceeds 2||A|| delta t by {report.max_excess:.3e}")
    logger.info(f"Drift over t<={times[-1]:g}: max {drift.max():.3e}, delta={delta:.3e}")
    return report
