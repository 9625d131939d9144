"""
Classical Ising energy with random bonds, a uniform longitudinal field and a
staggered field:

    H0(z) = sum_e J_e (1 - z_i z_j) / 2 - h_long sum_i z_i + h_stag (sum_even z_i - sum_odd z_i)
"""

import logging
from dataclasses import dataclass

import numpy as np

from peierls_lab.classical.couplings import CouplingField, uniform_couplings
from peierls_lab.errors import BudgetExceededError
from peierls_lab.lattice.spins import MAX_TABLE_SITES, spin_columns
from peierls_lab.lattice.torus import TorusLattice

logger = logging.getLogger(__name__)

ENERGY_CHUNK = 1 << 16


@dataclass(eq=False)
class ClassicalHamiltonian:
    couplings: CouplingField
    h_long: float = 0.0
    h_stag: float = 0.0

    @property
    def lattice(self) -> TorusLattice:
        return self.couplings.lattice

    @property
    def J(self) -> np.ndarray:
        return self.couplings.J

    @property
    def is_flip_symmetric(self) -> bool:
        return self.h_long == 0.0 and self.h_stag == 0.0

    @property
    def stagger(self) -> np.ndarray:
        """+1 on even sites, -1 on odd sites."""
        return np.where(self.lattice.even_mask, 1.0, -1.0)

    def site_fields(self) -> np.ndarray:
        """Per-site coefficient c_i of the linear term sum_i c_i z_i."""
        return -self.h_long + self.h_stag * self.stagger

    def energy(self, z: np.ndarray) -> np.ndarray:
        """Energy of one configuration (N,) or a batch (M, N)."""
        z = np.asarray(z, dtype=np.float64)
        es = self.lattice.edge_sites
        bonds = (1.0 - z[..., es[:, 0]] * z[..., es[:, 1]]) * 0.5
        return bonds @ self.J + z @ self.site_fields()

    def energies_of(self, indices: np.ndarray) -> np.ndarray:
        n = self.lattice.n_sites
        idx = np.asarray(indices, dtype=np.int64)
        out = np.empty(idx.shape[0], dtype=np.float64)
        for lo in range(0, idx.shape[0], ENERGY_CHUNK):
            part = idx[lo:lo + ENERGY_CHUNK]
            out[lo:lo + len(part)] = self.energy(spin_columns(part, n))
        return out

    def describe(self) -> str:
        kind = 'uniform' if self.couplings.is_uniform else 'random-bond'
        return f"{kind} H0 on {self.lattice.describe()}, h_long={self.h_long}, h_stag={self.h_stag}"


def uniform_hamiltonian(lat: TorusLattice, J: float = 1.0, h_long: float = 0.0, h_stag: float = 0.0) -> ClassicalHamiltonian:
    return ClassicalHamiltonian(uniform_couplings(lat, J), h_long=h_long, h_stag=h_stag)


def classical_energy(H: ClassicalHamiltonian, z: np.ndarray) -> float:
    return float(H.energy(z))


def energies_all(H: ClassicalHamiltonian, budget: int = MAX_TABLE_SITES) -> np.ndarray:
    """Energy of every basis state, indexed by basis index."""
    n = H.lattice.n_sites
    if n > budget:
        raise BudgetExceededError("basis energy table", n, budget, hint="sites; use Monte Carlo on larger lattices")
    return H.energies_of(np.arange(1 << n, dtype=np.int64))


def check_values(H: ClassicalHamiltonian, z: np.ndarray) -> np.ndarray:
    """Syndrome: one bit per edge, 1 where the bond is a domain wall."""
    z = np.asarray(z)
    es = H.lattice.edge_sites
    return (z[..., es[:, 0]] != z[..., es[:, 1]]).astype(np.uint8)


def translate_x(lat: TorusLattice, z: np.ndarray, shift: int = 1) -> np.ndarray:
    """Configuration translated by `shift` sites along x."""
    z = np.asarray(z)
    grid = z.reshape(lat.Ly, lat.Lx)
    return np.roll(grid, shift, axis=1).reshape(-1)


def staggered_symmetry_defect(H: ClassicalHamiltonian, z: np.ndarray) -> float:
    """
    |H0(z) - H0(-T z)| with T a one-site translation along x. Zero for
    translation-invariant couplings, no uniform field and even Lx.
    """
    z = np.asarray(z)
    return abs(classical_energy(H, z) - classical_energy(H, -translate_x(H.lattice, z)))


def max_staggered_defect(H: ClassicalHamiltonian, n_samples: int = 8, seed: int = 0) -> float:
    """Largest staggered_symmetry_defect over the all-plus state and n_samples seeded random states."""
    rng = np.random.default_rng(seed)
    configs = [np.ones(H.lattice.n_sites, dtype=np.float64)]
    configs += [rng.choice(np.array([-1, 1], dtype=np.float64), size=H.lattice.n_sites) for _ in range(n_samples)]
    return max(staggered_symmetry_defect(H, z) for z in configs)

