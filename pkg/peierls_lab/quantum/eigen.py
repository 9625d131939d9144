"""
Lowest eigenpairs of the implicit Hamiltonian, globally, per X_tot parity
sector, or on a diagonal-mask subspace.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from peierls_lab.classical.couplings import philox_rng
from peierls_lab.errors import ConvergenceError, EmptySubspaceError, StructureError
from peierls_lab.quantum.model import QuantumHamiltonian

logger = logging.getLogger(__name__)

DENSE_MAX_DIM = 2048
EIG_TOL = 1e-10
RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-12
START_STREAM = 0x5EED
ROUNDING_ULPS = 64

Sector = Union[None, str, int]


def splitting_resolution(energy: float, *residuals: float) -> float:
    """Smallest resolvable level difference: summed residual norms plus rounding at the energy scale."""
    return float(sum(residuals)) + ROUNDING_ULPS * float(np.finfo(np.float64).eps) * max(1.0, abs(energy))


def resolved_splitting(lower: float, upper: float, resolution: float) -> float:
    """upper - lower, reported as 0.0 when it is within the solver resolution."""
    gap = float(upper - lower)
    return 0.0 if abs(gap) <= resolution else gap


def sector_parity(sector: Sector) -> int:
    """0 for the whole space, +1 / -1 for the even / odd X_tot sector."""
    if sector in (None, 'global', 0):
        return 0
    if sector in ('even', '+', 1, +1):
        return 1
    if sector in ('odd', '-', -1):
        return -1
    raise StructureError(f"unknown sector {sector!r}; use None, 'even' or 'odd'")


@dataclass
class EigenSolveResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    sectors: List[int]
    delta_E0: Optional[float] = None
    method: str = 'dense'
    notes: List[str] = field(default_factory=list)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def orthonormality_defect(self) -> float:
        V = self.eigenvectors
        return float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max())


def _solve_small(matrix, m: int) -> Tuple[np.ndarray, np.ndarray]:
    dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix)
    vals, vecs = linalg.eigh(dense, subset_by_index=[0, min(m, dense.shape[0]) - 1])
    return vals, vecs


def _solve_krylov(apply, dim: int, m: int, dtype, tol: float, seed: int, maxiter: Optional[int]):
    op = LinearOperator((dim, dim), matvec=apply, dtype=dtype)
    v0 = philox_rng(seed, START_STREAM).standard_normal(dim)
    try:
        vals, vecs = eigsh(op, k=m, which='SA', tol=tol, v0=v0, maxiter=maxiter)
    except ArpackNoConvergence as e:
        raise ConvergenceError(f"Lanczos did not converge for {m} pairs in dimension {dim}: {e}",
                               residuals=[]) from e
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _resolve_doublets(H: QuantumHamiltonian, vals: np.ndarray, vecs: np.ndarray, tol: float) -> np.ndarray:
    """Rotate near-degenerate clusters so each vector has definite X_tot parity."""
    vecs = vecs.copy()
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[i] < tol:
            j += 1
        if j - i > 1:
            block = vecs[:, i:j]
            X = block.conj().T @ block[::-1]
            _, rot = linalg.eigh((X + X.conj().T) / 2)
            vecs[:, i:j] = block @ rot
        i = j
    return vecs


def lowest_eigenpairs(H: QuantumHamiltonian, m: int = 1, sector: Sector = None, tol: float = EIG_TOL,
                      residual_tol: float = RESIDUAL_TOL, seed: int = 0, maxiter: Optional[int] = None,
                      dense_max: int = DENSE_MAX_DIM, degeneracy_tol: float = DEGENERACY_TOL) -> EigenSolveResult:
    """
    m lowest eigenpairs of H in the requested parity sector. Eigenvectors are
    returned in the full 2**N basis with residuals measured on the full H.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    parity = sector_parity(sector)
    if parity and not H.symmetric:
        raise StructureError("parity sectors need a Hamiltonian that commutes with the global flip")
    dtype = np.complex128 if H.is_complex else np.float64
    if parity:
        dim = H.half

        def apply(v):
            return H.sector_matvec(v, parity)

        def small():
            return H.sector_sparse(parity)
    else:
        dim = H.dim
        apply = H.matvec
        small = H.to_sparse
    if m > dim:
        raise ValueError(f"asked for {m} eigenpairs of a {dim}-dimensional space")

    if dim <= dense_max or m >= dim - 1:
        vals, vecs = _solve_small(small(), m)
        method = 'dense'
    else:
        vals, vecs = _solve_krylov(apply, dim, m, dtype, tol, seed, maxiter)
        method = 'lanczos'
    if parity:
        vecs = np.column_stack([H.sector_embed(vecs[:, j], parity) for j in range(vecs.shape[1])])
    vecs = vecs / np.linalg.norm(vecs, axis=0)

    if not parity and H.symmetric:
        vecs = _resolve_doublets(H, vals, vecs, degeneracy_tol)
        labels = [int(np.sign(round(H.parity_of(vecs[:, j]), 6))) for j in range(vecs.shape[1])]
    else:
        labels = [parity] * len(vals)

    residuals = np.array([np.linalg.norm(H.matvec(vecs[:, j]) - vals[j] * vecs[:, j]) for j in range(len(vals))])
    if residuals.max() > residual_tol:
        raise ConvergenceError(f"eigenpair residuals above {residual_tol} after {method} solve",
                               residuals=residuals.tolist())

    result = EigenSolveResult(eigenvalues=np.asarray(vals, dtype=np.float64), eigenvectors=vecs,
                              residuals=residuals, sectors=labels, method=method)
    if not parity and H.symmetric:
        plus = [v for v, s in zip(vals, labels) if s == 1]
        minus = [v for v, s in zip(vals, labels) if s == -1]
        if plus and minus:
            i, j = labels.index(1), labels.index(-1)
            result.delta_E0 = resolved_splitting(plus[0], minus[0],
                                                 splitting_resolution(vals[0], residuals[i], residuals[j]))
    logger.info(f"{method} solve, sector {sector or 'global'}: E0={vals[0]:.12g}, max residual {residuals.max():.2e}")
    return result


@dataclass
class ParityDoublet:
    E_even: float
    E_odd: float
    even: np.ndarray
    odd: np.ndarray
    resolution: float = 0.0

    @property
    def delta_E0(self) -> float:
        return resolved_splitting(self.E_even, self.E_odd, self.resolution)

    def well_combinations(self) -> Tuple[np.ndarray, np.ndarray]:
        """(|+> + |->)/sqrt(2) and (|+> - |->)/sqrt(2) with the relative sign fixed by <Z_0>."""
        odd = self.odd
        if np.real(np.vdot(self.even, _z0(self.even.size) * odd)) < 0:
            odd = -odd
        return (self.even + odd) / np.sqrt(2.0), (self.even - odd) / np.sqrt(2.0)


def _z0(dim: int) -> np.ndarray:
    return 1.0 - 2.0 * (np.arange(dim) & 1)


def parity_doublet(H: QuantumHamiltonian, **kwargs) -> ParityDoublet:
    """Ground states of both X_tot sectors; delta_E0 = E0(odd) - E0(even)."""
    if not H.symmetric:
        raise StructureError("parity doublet needs a Hamiltonian that commutes with the global flip")
    even = lowest_eigenpairs(H, 1, 'even', **kwargs)
    odd = lowest_eigenpairs(H, 1, 'odd', **kwargs)
    doublet = ParityDoublet(E_even=even.ground_energy, E_odd=odd.ground_energy,
                            even=even.ground_state, odd=odd.ground_state,
                            resolution=splitting_resolution(even.ground_energy, even.residuals[0], odd.residuals[0]))
    logger.info(f"Parity doublet: E+={doublet.E_even:.12g}, delta_E0={doublet.delta_E0:.3e} "
                f"(resolution {doublet.resolution:.1e})")
    return doublet


@dataclass
class RestrictedGround:
    energy: float
    state: np.ndarray
    dimension: int
    residual: float


def restricted_ground_state(H: QuantumHamiltonian, mask: np.ndarray, m: int = 1, tol: float = EIG_TOL,
                            seed: int = 0, dense_max: int = DENSE_MAX_DIM) -> List[RestrictedGround]:
    """Lowest m eigenpairs of P H P on the span of the basis states in `mask`."""
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptySubspaceError("constraint subspace is empty")
    m = min(m, idx.size)

    def apply(v):
        full = np.zeros(H.dim, dtype=v.dtype)
        full[idx] = v
        return H.matvec(full)[idx]

    if idx.size <= dense_max or m >= idx.size - 1:
        sub = H.to_sparse()[idx][:, idx]
        vals, vecs = _solve_small(sub, m)
    else:
        dtype = np.complex128 if H.is_complex else np.float64
        vals, vecs = _solve_krylov(apply, idx.size, m, dtype, tol, seed, None)
    out = []
    for j in range(len(vals)):
        state = np.zeros(H.dim, dtype=vecs.dtype)
        state[idx] = vecs[:, j] / np.linalg.norm(vecs[:, j])
        residual = float(np.linalg.norm(apply(state[idx]) - vals[j] * state[idx]))
        out.append(RestrictedGround(energy=float(vals[j]), state=state, dimension=int(idx.size), residual=residual))
    logger.debug(f"Restricted solve on {idx.size} states: E={vals[0]:.12g}")
    return out


def restricted_min_energy(H: QuantumHamiltonian, mask: np.ndarray, **kwargs) -> float:
    return restricted_ground_state(H, mask, m=1, **kwargs)[0].energy
