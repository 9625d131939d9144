import numpy as np
import pytest

from peierls_lab.classical.couplings import CouplingField, DistributionSpec, sample_couplings, uniform_couplings
from peierls_lab.classical.hamiltonian import (
    ClassicalHamiltonian, check_values, classical_energy, energies_all, max_staggered_defect, staggered_symmetry_defect,
    translate_x, uniform_hamiltonian,
)
from peierls_lab.errors import BudgetExceededError, DistributionError
from peierls_lab.lattice.spins import spins_from_index
from peierls_lab.lattice.torus import build_torus

from conftest import naive_energy


class TestDistributionSpec:
    def test_two_point_mass(self):
        spec = DistributionSpec.two_point(1.0, 0.1, 0.05)
        assert spec.mass_at_most(0.3) == pytest.approx(0.05)
        assert spec.mass_at_most(1.0) == pytest.approx(1.0)
        assert spec.support() == (0.1, 1.0)
        assert (spec.J1, spec.J2) == (0.0, 1.0)

    def test_uniform_mass(self):
        spec = DistributionSpec.uniform(-1.0, 1.0)
        assert spec.mass_at_most(0.0) == pytest.approx(0.5)
        assert spec.J1 == 1.0

    @pytest.mark.parametrize('make', [
        lambda: DistributionSpec.two_point(1.0, 0.1, 1.5),
        lambda: DistributionSpec.uniform(2.0, 1.0),
        lambda: DistributionSpec.table([1.0, 2.0], [1.0]),
        lambda: DistributionSpec.uniform(0.0, 2.0, J2=1.0),
        lambda: DistributionSpec('gaussian', {}),
    ])
    def test_invalid(self, make):
        with pytest.raises(DistributionError):
            make()

    def test_dict_round_trip(self):
        spec = DistributionSpec.table([0.5, 1.0], [1, 3], seed=4)
        again = DistributionSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()


class TestCouplings:
    def test_reproducible(self, lat4):
        spec = DistributionSpec.uniform(0.0, 1.0)
        a = sample_couplings(spec, lat4, seed=3)
        b = sample_couplings(spec, lat4, seed=3)
        c = sample_couplings(spec, lat4, seed=4)
        np.testing.assert_array_equal(a.J, b.J)
        assert not np.array_equal(a.J, c.J)

    def test_support_respected(self, lat6):
        field = sample_couplings(DistributionSpec.two_point(1.0, 0.1, 0.3), lat6, seed=1)
        assert set(np.unique(field.J)) <= {0.1, 1.0}
        assert field.p_hat(0.5) == pytest.approx(np.mean(field.J == 0.1))

    def test_wrong_shape(self, lat4):
        with pytest.raises(DistributionError):
            CouplingField(lattice=lat4, J=np.ones(5))

    def test_save_load(self, lat4, tmp_path):
        field = sample_couplings(DistributionSpec.uniform(-0.5, 1.5), lat4, seed=2)
        path = str(tmp_path / 'J.json')
        field.save(path)
        loaded = CouplingField.load(path)
        np.testing.assert_array_equal(loaded.J, field.J)
        assert loaded.lattice == lat4
        assert loaded.bounds == field.bounds

    def test_uniform(self, lat4):
        field = uniform_couplings(lat4, 2.0)
        assert field.is_uniform
        assert field.bounds == (0.0, 2.0)


class TestEnergy:
    def test_ground_and_single_flip(self, uniform4, lat4):
        z = np.ones(16)
        assert classical_energy(uniform4, z) == 0.0
        z[5] = -1
        assert classical_energy(uniform4, z) == pytest.approx(4.0)
        assert check_values(uniform4, z).sum() == 4

    def test_matches_bond_sum(self, random33):
        lat = random33.lattice
        table = energies_all(random33)
        for index in (0, 1, 77, 300, 511):
            z = spins_from_index(index, lat.n_sites)
            expected = naive_energy(lat, random33.J, random33.h_long, random33.h_stag, z)
            assert table[index] == pytest.approx(expected)

    def test_flip_symmetry(self, random33):
        H = uniform_hamiltonian(random33.lattice)
        table = energies_all(H)
        np.testing.assert_allclose(table, table[::-1])
        assert H.is_flip_symmetric
        assert not random33.is_flip_symmetric

    def test_longitudinal_field_favours_plus(self, lat4):
        H = uniform_hamiltonian(lat4, h_long=0.1)
        assert classical_energy(H, np.ones(16)) == pytest.approx(-1.6)
        assert classical_energy(H, -np.ones(16)) == pytest.approx(1.6)

    def test_budget(self):
        H = uniform_hamiltonian(build_torus(6))
        with pytest.raises(BudgetExceededError):
            energies_all(H)

    def test_staggered_symmetry(self, lat4):
        H = uniform_hamiltonian(lat4, h_stag=0.3)
        rng = np.random.default_rng(0)
        for _ in range(5):
            z = rng.choice([-1, 1], size=16)
            assert staggered_symmetry_defect(H, z) == pytest.approx(0.0, abs=1e-12)
        tilted = uniform_hamiltonian(lat4, h_long=0.1, h_stag=0.3)
        assert staggered_symmetry_defect(tilted, np.ones(16)) == pytest.approx(3.2)

    def test_max_staggered_defect_samples(self, lat4):
        assert max_staggered_defect(uniform_hamiltonian(lat4, h_stag=0.3), seed=5) == pytest.approx(0.0, abs=1e-12)
        tilted = uniform_hamiltonian(lat4, h_long=0.1, h_stag=0.3)
        assert max_staggered_defect(tilted, n_samples=0) == pytest.approx(3.2)
        assert max_staggered_defect(tilted, seed=5) >= 3.2 - 1e-12
        assert max_staggered_defect(tilted, seed=5) == max_staggered_defect(tilted, seed=5)
        field = sample_couplings(DistributionSpec.two_point(1.0, 0.1, 0.3), lat4, seed=1)
        disordered = ClassicalHamiltonian(field, h_stag=0.3)
        assert max_staggered_defect(disordered, seed=0) > max_staggered_defect(disordered, n_samples=0)

    def test_translate(self, lat4):
        z = np.arange(16)
        shifted = translate_x(lat4, z)
        assert shifted[1] == 0
        assert shifted[0] == 3
