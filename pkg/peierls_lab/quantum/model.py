"""
Perturbed classical Hamiltonians H = H0 + sum_F V_F on the bit-packed spin basis.

Each term V_F acts on a support F with a local matrix indexed by the local
bit pattern l = sum_j bit(F[j]) << j, where bit 1 means spin -1. H is never
stored densely: its action is a diagonal product plus, per term, one gather
per non-zero local column.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator

from peierls_lab.classical.hamiltonian import ClassicalHamiltonian, energies_all
from peierls_lab.errors import BudgetExceededError, StructureError
from peierls_lab.lattice.torus import TorusLattice

logger = logging.getLogger(__name__)

MAX_QUANTUM_SITES = 22
MAX_DENSE_SITES = 12
# index tables are cached per term below this dimension
CACHE_DIM = 1 << 18

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])


@dataclass(eq=False)
class PerturbationTerm:
    support: Tuple[int, ...]
    matrix: np.ndarray
    label: str = ''

    def __post_init__(self):
        self.support = tuple(int(s) for s in self.support)
        self.matrix = np.asarray(self.matrix)
        dim = 1 << len(self.support)
        if self.matrix.shape != (dim, dim):
            raise StructureError(f"term on {len(self.support)} sites needs a {dim}x{dim} matrix, got {self.matrix.shape}")
        if len(set(self.support)) != len(self.support):
            raise StructureError(f"term support {self.support} repeats a site")
        if not np.allclose(self.matrix, self.matrix.conj().T, atol=1e-12):
            raise StructureError(f"term {self.label or self.support} is not Hermitian")

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, ord=2))

    @property
    def site_mask(self) -> int:
        return sum(1 << s for s in self.support)

    def conjugated_by_flips(self, sites: Iterable[int]) -> np.ndarray:
        """Local matrix of X_S V_F X_S for the sites S of F that lie in `sites`."""
        chosen = set(int(s) for s in sites)
        flip = sum(1 << j for j, s in enumerate(self.support) if s in chosen)
        perm = np.arange(self.matrix.shape[0]) ^ flip
        return self.matrix[np.ix_(perm, perm)]

    @property
    def is_locally_symmetric(self) -> bool:
        """V_F commutes with the product of X over its own support."""
        return bool(np.allclose(self.conjugated_by_flips(self.support), self.matrix, atol=1e-12))


def x_term(site: int, strength: float) -> PerturbationTerm:
    return PerturbationTerm((site,), strength * PAULI_X, label=f"X{site}")


def z_term(site: int, strength: float) -> PerturbationTerm:
    return PerturbationTerm((site,), strength * PAULI_Z, label=f"Z{site}")


def zz_term(i: int, j: int, strength: float) -> PerturbationTerm:
    return PerturbationTerm((i, j), strength * np.kron(PAULI_Z, PAULI_Z), label=f"Z{i}Z{j}")


def transverse_field(lat: TorusLattice, eps: float) -> List[PerturbationTerm]:
    """-eps X_i on every site."""
    return [x_term(s, -eps) for s in range(lat.n_sites)]


@dataclass(eq=False)
class QuantumModel:
    classical: ClassicalHamiltonian
    terms: List[PerturbationTerm] = field(default_factory=list)

    def __post_init__(self):
        n = self.lattice.n_sites
        for t in self.terms:
            if max(t.support) >= n or min(t.support) < 0:
                raise StructureError(f"term {t.label or t.support} leaves the {n}-site lattice")

    @property
    def lattice(self) -> TorusLattice:
        return self.classical.lattice

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def q(self) -> int:
        return max((t.size for t in self.terms), default=0)

    @property
    def g(self) -> int:
        """Max checks touching a site, or sites per check, whichever is larger."""
        per_site = max((len(es) for es in self.lattice.site_edges), default=0)
        return max(per_site, 2)

    @property
    def eps(self) -> float:
        """max over sites of sum_{F containing i} ||V_F||."""
        load = np.zeros(self.n_sites)
        for t in self.terms:
            load[list(t.support)] += t.norm
        return float(load.max()) if self.terms else 0.0

    @property
    def locally_symmetric(self) -> bool:
        return all(t.is_locally_symmetric for t in self.terms)

    @property
    def symmetric(self) -> bool:
        """[H, X_tot] = 0."""
        return self.classical.is_flip_symmetric and self.locally_symmetric

    def with_classical(self, classical: ClassicalHamiltonian) -> 'QuantumModel':
        return QuantumModel(classical=classical, terms=list(self.terms))

    def region_terms(self, sites: Iterable[int]) -> List[PerturbationTerm]:
        region = set(int(s) for s in sites)
        return [t for t in self.terms if set(t.support) <= region]

    def describe(self) -> str:
        return f"{self.classical.describe()} + {len(self.terms)} terms (q={self.q}, eps={self.eps:.4g})"


def tfim_model(classical: ClassicalHamiltonian, eps: float) -> QuantumModel:
    return QuantumModel(classical=classical, terms=transverse_field(classical.lattice, eps))


class _TermAction:
    """Gather tables for one term: local index of every basis state and column offsets."""

    def __init__(self, term: PerturbationTerm, dim: int):
        self.term = term
        self.dim = dim
        self.columns = [c for c in range(term.matrix.shape[1]) if np.any(term.matrix[:, c] != 0)]
        self.offsets = {c: sum(((c >> j) & 1) << s for j, s in enumerate(term.support)) for c in self.columns}
        self._tables: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def tables(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._tables is not None:
            return self._tables
        idx = np.arange(self.dim, dtype=np.int64)
        local = np.zeros(self.dim, dtype=np.int64)
        for j, s in enumerate(self.term.support):
            local |= ((idx >> s) & 1) << j
        base = idx & ~np.int64(self.term.site_mask)
        if self.dim <= CACHE_DIM:
            self._tables = (local, base)
        return local, base

    def apply(self, v: np.ndarray, out: np.ndarray):
        local, base = self.tables()
        M = self.term.matrix
        for c in self.columns:
            out += M[local, c] * v[base | self.offsets[c]]

    def coo(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        local, base = self.tables()
        rows, cols, vals = [], [], []
        idx = np.arange(self.dim, dtype=np.int64)
        for c in self.columns:
            coef = self.term.matrix[local, c]
            keep = coef != 0
            rows.append(idx[keep])
            cols.append((base | self.offsets[c])[keep])
            vals.append(coef[keep])
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


class QuantumHamiltonian:
    """Implicit H = diag(E) + sum_F V_F on 2**n basis states."""

    def __init__(self, n_sites: int, diagonal: np.ndarray, terms: Sequence[PerturbationTerm], symmetric: bool = False):
        self.n_sites = int(n_sites)
        self.dim = 1 << self.n_sites
        self.diagonal = np.asarray(diagonal, dtype=np.float64)
        if self.diagonal.shape != (self.dim,):
            raise StructureError(f"diagonal has shape {self.diagonal.shape}, expected ({self.dim},)")
        self.terms = list(terms)
        self.symmetric = bool(symmetric)
        self._actions = [_TermAction(t, self.dim) for t in self.terms]
        self.is_complex = any(np.iscomplexobj(t.matrix) for t in self.terms)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.dim, self.dim

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        dtype = np.result_type(v.dtype, np.complex128 if self.is_complex else np.float64)
        out = (self.diagonal * v).astype(dtype, copy=False)
        for action in self._actions:
            action.apply(v, out)
        return out

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        if v.ndim == 2:
            return np.column_stack([self.matvec(v[:, j]) for j in range(v.shape[1])])
        return self.matvec(v)

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.matvec(psi))) / np.real(np.vdot(psi, psi)))

    def as_linear_operator(self, dtype=np.float64) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.matvec, dtype=dtype)

    def to_sparse(self) -> sparse.csr_matrix:
        rows = [np.arange(self.dim, dtype=np.int64)]
        cols = [np.arange(self.dim, dtype=np.int64)]
        vals = [self.diagonal.astype(np.complex128 if self.is_complex else np.float64)]
        for action in self._actions:
            if action.columns:
                r, c, d = action.coo()
                rows.append(r)
                cols.append(c)
                vals.append(d)
        return sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=self.shape).tocsr()

    def dense(self, budget: int = MAX_DENSE_SITES) -> np.ndarray:
        if self.n_sites > budget:
            raise BudgetExceededError("dense Hamiltonian", self.n_sites, budget, hint="sites; use the matvec operator")
        return self.to_sparse().toarray()

    def plus_diagonal(self, extra: np.ndarray, symmetric: Optional[bool] = None) -> 'QuantumHamiltonian':
        return QuantumHamiltonian(self.n_sites, self.diagonal + extra, self.terms,
                                  symmetric=self.symmetric if symmetric is None else symmetric)

    # ---- X_tot parity sectors ----

    @property
    def half(self) -> int:
        return self.dim >> 1

    def sector_embed(self, v: np.ndarray, parity: int) -> np.ndarray:
        """(|r> + parity |r-bar>)/sqrt(2) coefficients for representatives r < dim/2."""
        full = np.empty(self.dim, dtype=np.result_type(v.dtype, np.float64))
        full[:self.half] = v / np.sqrt(2.0)
        full[self.half:] = parity * v[::-1] / np.sqrt(2.0)
        return full

    def sector_project(self, w: np.ndarray, parity: int) -> np.ndarray:
        return (w[:self.half] + parity * w[self.half:][::-1]) / np.sqrt(2.0)

    def sector_matvec(self, v: np.ndarray, parity: int) -> np.ndarray:
        if not self.symmetric:
            raise StructureError("parity sectors need a Hamiltonian that commutes with the global flip")
        return self.sector_project(self.matvec(self.sector_embed(v, parity)), parity)

    def sector_sparse(self, parity: int) -> sparse.csr_matrix:
        """S^T H S with S the sector embedding."""
        half = self.half
        r = np.arange(half)
        S = sparse.coo_matrix(
            (np.concatenate([np.full(half, 1 / np.sqrt(2.0)), np.full(half, parity / np.sqrt(2.0))]),
             (np.concatenate([r, self.dim - 1 - r]), np.concatenate([r, r]))),
            shape=(self.dim, half)).tocsr()
        return (S.T @ self.to_sparse() @ S).tocsr()

    def parity_of(self, psi: np.ndarray) -> float:
        """<psi|X_tot|psi> for a normalized state."""
        return float(np.real(np.vdot(psi, psi[::-1])))


def build_quantum_hamiltonian(model: QuantumModel, budget: int = MAX_QUANTUM_SITES,
                              diagonal: Optional[np.ndarray] = None) -> QuantumHamiltonian:
    n = model.n_sites
    if n > budget:
        raise BudgetExceededError("quantum Hamiltonian", n, budget, hint="sites; 2**N amplitudes must fit in memory")
    diag = energies_all(model.classical, budget=budget) if diagonal is None else diagonal
    H = QuantumHamiltonian(n, diag, model.terms, symmetric=model.symmetric)
    logger.info(f"Built H on {n} sites (dim {H.dim}): {model.describe()}")
    return H


def region_hamiltonian(model: QuantumModel, sites: Iterable[int]) -> QuantumHamiltonian:
    """H_A: every bond, field and term supported inside the region."""
    region = sorted(set(int(s) for s in sites))
    inside = np.zeros(model.n_sites, dtype=bool)
    inside[region] = True
    H0 = model.classical
    lat = model.lattice
    es = lat.edge_sites
    bond_in = inside[es[:, 0]] & inside[es[:, 1]]
    idx = np.arange(1 << model.n_sites, dtype=np.int64)
    diag = np.zeros(idx.size)
    for e in np.flatnonzero(bond_in):
        i, j = es[e]
        diag += H0.J[e] * (((idx >> i) ^ (idx >> j)) & 1)
    fields = H0.site_fields()
    for s in region:
        diag += fields[s] * (1 - 2 * ((idx >> s) & 1))
    terms = model.region_terms(region)
    symmetric = H0.is_flip_symmetric and all(t.is_locally_symmetric for t in terms)
    return QuantumHamiltonian(model.n_sites, diag, terms, symmetric=symmetric)


def order_parameter_diagonal(n_sites: int, sites: Optional[Sequence[int]] = None) -> np.ndarray:
    """Diagonal of (1/|S|) sum_{i in S} Z_i, S defaulting to every site."""
    sites = range(n_sites) if sites is None else list(sites)
    idx = np.arange(1 << n_sites, dtype=np.int64)
    total = np.zeros(idx.size)
    for s in sites:
        total += 1 - 2 * ((idx >> s) & 1)
    return total / len(sites)


def z_diagonal(n_sites: int, site: int) -> np.ndarray:
    idx = np.arange(1 << n_sites, dtype=np.int64)
    return (1 - 2 * ((idx >> site) & 1)).astype(np.float64)
