import numpy as np
import pytest

from peierls_lab.classical.couplings import DistributionSpec, sample_couplings
from peierls_lab.classical.hamiltonian import ClassicalHamiltonian, uniform_hamiltonian
from peierls_lab.lattice.torus import TorusLattice, build_torus
from peierls_lab.peierls.structure import build_bottleneck_structure
from peierls_lab.quantum.model import tfim_model

DESK = {'L': 4, 'cap': 8}


@pytest.fixture(scope='session')
def lat4():
    return build_torus(4)


@pytest.fixture(scope='session')
def lat6():
    return build_torus(6)


@pytest.fixture(scope='session')
def lat43():
    return TorusLattice(4, 3)


@pytest.fixture(scope='session')
def lat33():
    return TorusLattice(3, 3)


@pytest.fixture(scope='session')
def uniform4(lat4):
    return uniform_hamiltonian(lat4, J=1.0)


@pytest.fixture(scope='session')
def random33(lat33):
    spec = DistributionSpec.uniform(-0.5, 1.5)
    return ClassicalHamiltonian(sample_couplings(spec, lat33, seed=7), h_long=0.3, h_stag=0.2)


@pytest.fixture(scope='session')
def desk4(lat4):
    return build_bottleneck_structure(lat4, R=1, overrides=DESK)


@pytest.fixture(scope='session')
def desk33(lat33):
    return build_bottleneck_structure(lat33, R=1, overrides=DESK)


@pytest.fixture(scope='session')
def desk43(lat43):
    return build_bottleneck_structure(lat43, R=1, overrides=DESK)


@pytest.fixture(scope='session')
def tfim43(lat43):
    return tfim_model(uniform_hamiltonian(lat43, J=1.0), eps=0.2)


@pytest.fixture(scope='session')
def tfim33(lat33):
    return tfim_model(uniform_hamiltonian(lat33, J=1.0), eps=0.3)


def naive_energy(lat, J, h_long, h_stag, z):
    """Bond-by-bond energy, independent of the vectorized path."""
    total = 0.0
    for e, (i, j) in enumerate(lat.edge_sites):
        total += J[e] * (1 - z[i] * z[j]) / 2
    for s in range(lat.n_sites):
        x, y = lat.coords(s)
        stagger = 1 if (x + y) % 2 == 0 else -1
        total += (-h_long + h_stag * stagger) * z[s]
    return total


def dense_tfim(lat, J, h_long, h_stag, eps):
    """Kronecker-product H0 - eps * sum X_i for small lattices."""
    n = lat.n_sites
    I2 = np.eye(2)
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    Z = np.array([[1.0, 0.0], [0.0, -1.0]])

    def site_op(op, s):
        # site s is bit s of the index, i.e. the s-th factor from the right
        out = np.array([[1.0]])
        for k in reversed(range(n)):
            out = np.kron(out, op if k == s else I2)
        return out

    dim = 1 << n
    H = np.zeros((dim, dim))
    for e, (i, j) in enumerate(lat.edge_sites):
        H += J[e] * (np.eye(dim) - site_op(Z, i) @ site_op(Z, j)) / 2
    for s in range(n):
        x, y = lat.coords(s)
        stagger = 1 if (x + y) % 2 == 0 else -1
        H += (-h_long + h_stag * stagger) * site_op(Z, s)
        H -= eps * site_op(X, s)
    return H
