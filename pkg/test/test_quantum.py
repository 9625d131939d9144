import numpy as np
import pytest

from peierls_lab.errors import ConvergenceError, EmptySubspaceError, StructureError
from peierls_lab.quantum.diagnostics import (
    almost_eigen_residual, dw_projector_weight, eb_decomposition, loop_excitations, theorem_window,
    truncated_symmetry_shift, union_bound_check, well_projectors,
)
from peierls_lab.quantum.eigen import (
    lowest_eigenpairs, parity_doublet, resolved_splitting, restricted_ground_state, restricted_min_energy,
    sector_parity, splitting_resolution,
)
from peierls_lab.quantum.model import (
    PerturbationTerm, QuantumModel, build_quantum_hamiltonian, order_parameter_diagonal, region_hamiltonian,
    tfim_model, x_term, z_term, zz_term,
)
from peierls_lab.quantum.ssb import ssb_report, tilted_ground_overlap
from peierls_lab.quantum.state_io import load_state, save_state
from peierls_lab.classical.hamiltonian import uniform_hamiltonian

from conftest import dense_tfim


@pytest.fixture(scope='module')
def H33(tfim33):
    return build_quantum_hamiltonian(tfim33)


class TestModel:
    def test_uniform_matches_kron(self, tfim33, lat33, H33):
        expected = dense_tfim(lat33, np.ones(lat33.n_edges), 0.0, 0.0, 0.3)
        np.testing.assert_allclose(H33.dense(), expected, atol=1e-12)

    def test_fields_match_kron(self, random33):
        model = tfim_model(random33, 0.25)
        H = build_quantum_hamiltonian(model)
        expected = dense_tfim(random33.lattice, random33.J, random33.h_long, random33.h_stag, 0.25)
        np.testing.assert_allclose(H.dense(), expected, atol=1e-12)
        assert not H.symmetric

    def test_locality_constants(self, tfim33):
        assert (tfim33.q, tfim33.g) == (1, 4)
        assert tfim33.eps == pytest.approx(0.3)
        assert tfim33.symmetric

    def test_eps_sums_terms_per_site(self, lat33):
        model = QuantumModel(uniform_hamiltonian(lat33), [x_term(0, 0.2), zz_term(0, 1, 0.5)])
        assert model.q == 2
        assert model.eps == pytest.approx(0.7)

    def test_term_validation(self):
        with pytest.raises(StructureError):
            PerturbationTerm((0,), np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(StructureError):
            PerturbationTerm((1, 1), np.eye(4))
        assert not z_term(0, 1.0).is_locally_symmetric
        assert zz_term(0, 1, 1.0).is_locally_symmetric

    def test_term_outside_lattice(self, lat33):
        with pytest.raises(StructureError):
            QuantumModel(uniform_hamiltonian(lat33), [x_term(9, 0.1)])

    def test_region_hamiltonian_of_everything(self, tfim33, H33):
        H_A = region_hamiltonian(tfim33, range(9))
        np.testing.assert_allclose(H_A.dense(), H33.dense(), atol=1e-12)

    def test_order_parameter(self):
        A = order_parameter_diagonal(3)
        assert A[0] == 1.0
        assert A[7] == -1.0
        assert A[1] == pytest.approx(1 / 3)


class TestEigen:
    def test_ground_energy_matches_dense(self, H33):
        exact = np.linalg.eigvalsh(H33.dense())
        result = lowest_eigenpairs(H33, 2)
        np.testing.assert_allclose(result.eigenvalues, exact[:2], atol=1e-10)
        assert result.sectors[0] == 1
        assert result.delta_E0 > 0
        assert result.orthonormality_defect() < 1e-10

    def test_sectors(self, H33):
        even = lowest_eigenpairs(H33, 1, 'even')
        odd = lowest_eigenpairs(H33, 1, 'odd')
        full = lowest_eigenpairs(H33, 1)
        assert min(even.ground_energy, odd.ground_energy) == pytest.approx(full.ground_energy)
        assert H33.parity_of(even.ground_state) == pytest.approx(1.0)
        assert H33.parity_of(odd.ground_state) == pytest.approx(-1.0)

    def test_lanczos_path(self, H33):
        dense = lowest_eigenpairs(H33, 2, 'even')
        krylov = lowest_eigenpairs(H33, 2, 'even', dense_max=16)
        assert krylov.method == 'lanczos'
        np.testing.assert_allclose(krylov.eigenvalues, dense.eigenvalues, atol=1e-9)

    def test_sector_needs_symmetry(self, random33):
        H = build_quantum_hamiltonian(tfim_model(random33, 0.2))
        with pytest.raises(StructureError):
            lowest_eigenpairs(H, 1, 'even')
        with pytest.raises(StructureError):
            parity_doublet(H)

    def test_unknown_sector(self):
        with pytest.raises(StructureError):
            sector_parity('sideways')

    def test_doublet_combinations(self, H33, desk33):
        doublet = parity_doublet(H33)
        assert doublet.delta_E0 > 0
        psi1, psi2 = doublet.well_combinations()
        proj = well_projectors(desk33)
        z0 = 1.0 - 2.0 * (np.arange(512) & 1)
        assert np.sum(np.abs(psi1) ** 2 * z0) > 0
        assert np.sum(np.abs(psi1[proj.well_1]) ** 2) > np.sum(np.abs(psi1[proj.well_2]) ** 2)
        assert np.linalg.norm(psi1) == pytest.approx(1.0)
        assert abs(np.vdot(psi1, psi2)) < 1e-10

    def test_splitting_below_resolution_is_zero(self, lat33):
        resolution = splitting_resolution(-18.0, 1e-14, 1e-14)
        assert resolution > 2.8e-15
        assert resolved_splitting(-18.0, -18.0 - 2.8e-15, resolution) == 0.0
        assert resolved_splitting(-18.0, -17.5, resolution) == pytest.approx(0.5)
        classical = QuantumModel(classical=uniform_hamiltonian(lat33))
        doublet = parity_doublet(build_quantum_hamiltonian(classical))
        assert doublet.resolution > 0
        assert doublet.delta_E0 == 0.0
        assert lowest_eigenpairs(build_quantum_hamiltonian(classical), 2).delta_E0 == 0.0

    def test_restricted_everything_is_global(self, H33):
        ground = restricted_ground_state(H33, np.ones(512, dtype=bool))[0]
        assert ground.energy == pytest.approx(lowest_eigenpairs(H33, 1).ground_energy)
        assert ground.residual < 1e-8

    def test_restricted_to_well(self, H33, desk33):
        well = well_projectors(desk33).well_1
        ground = restricted_ground_state(H33, well)[0]
        assert np.all(ground.state[~well] == 0)
        assert ground.dimension == int(well.sum())
        assert ground.energy >= lowest_eigenpairs(H33, 1).ground_energy - 1e-12
        assert restricted_min_energy(H33, well) == pytest.approx(ground.energy)

    def test_empty_restriction(self, H33):
        with pytest.raises(EmptySubspaceError):
            restricted_ground_state(H33, np.zeros(512, dtype=bool))

    def test_residual_gate(self, H33):
        with pytest.raises(ConvergenceError):
            lowest_eigenpairs(H33, 1, residual_tol=0.0)


class TestDiagnostics:
    def test_loop_windows(self, tfim33, desk33, lat33):
        B = desk33.indicator(0)
        assert B.length == 4
        ground_plus = np.zeros(512)
        ground_plus[0] = 1.0
        dec = eb_decomposition(ground_plus, B, tfim33, bs=desk33, Delta=1.0)
        assert (dec.window, dec.n_star) == (4, 1)
        np.testing.assert_allclose(dec.amplitudes, [0.0, 1.0])

        # flipping one site inside a unit loop excites all four of its links
        excited = np.flatnonzero(loop_excitations(lat33, B) == 4)
        assert excited.size > 0
        state = np.zeros(512)
        state[excited[0]] = 1.0
        dec = eb_decomposition(state, B, tfim33, bs=desk33, Delta=1.0)
        np.testing.assert_allclose(dec.amplitudes, [1.0, 0.0])
        assert dw_projector_weight(state, B, lat33) == pytest.approx(1.0)
        assert dec.ceiling == pytest.approx(3 * 4 * 0.3)

    def test_decay_on_ground_state(self, H33, tfim33, desk33):
        psi = restricted_ground_state(H33, well_projectors(desk33).well_1)[0].state
        dec = eb_decomposition(psi, desk33.indicator(0), tfim33, bs=desk33, Delta=1.0)
        assert dec.amplitudes[0] < dec.amplitudes[1]
        assert dec.decay_holds

    def test_eigen_residual(self, H33):
        result = lowest_eigenpairs(H33, 1)
        assert almost_eigen_residual(H33, result.ground_state) < 1e-8
        with pytest.raises(ValueError):
            almost_eigen_residual(H33, np.zeros(512))

    def test_symmetric_terms_do_not_shift(self, tfim33):
        shift = truncated_symmetry_shift(tfim33, [0, 1, 3])
        assert shift.estimate == pytest.approx(0.0)
        assert shift.exact == pytest.approx(0.0, abs=1e-12)
        assert shift.holds

    def test_straddling_term_shift(self, lat33):
        model = QuantumModel(uniform_hamiltonian(lat33), [zz_term(0, 1, 0.5)])
        shift = truncated_symmetry_shift(model, [0])
        assert shift.estimate == pytest.approx(1.0)
        assert shift.exact == pytest.approx(1.0)
        assert shift.boundary_sites == [0]
        assert shift.holds

    def test_asymmetric_terms_are_reported(self, lat33):
        model = QuantumModel(uniform_hamiltonian(lat33), [z_term(0, 0.5)])
        assert truncated_symmetry_shift(model, [0]).holds is None

    def test_theorem_window(self, lat33):
        wide = theorem_window(tfim_model(uniform_hamiltonian(lat33), 0.3), Delta=1.0, theta=0.01, L=4)
        assert not wide.inside
        narrow = theorem_window(tfim_model(uniform_hamiltonian(lat33), 0.001), Delta=1.0, theta=0.01, L=4)
        assert narrow.inside
        assert narrow.zeta == pytest.approx(0.012 * np.exp(0.1))
        assert (narrow.qg, narrow.n_star) == (4, 1)

    def test_union_bound_on_domino(self, desk33):
        # two flipped neighbours: a single length-6 wall, inside Bottleneck(1)
        psi = np.zeros(512)
        psi[0b11] = 1.0
        check = union_bound_check(psi, desk33, 1)
        assert check.bottleneck_weight == pytest.approx(1.0)
        assert check.indicator_sum >= 1.0
        assert check.holds


class TestSSB:
    def test_cat_state(self, desk33):
        psi = np.zeros(512)
        psi[[0, 511]] = 1 / np.sqrt(2)
        report = ssb_report(psi, desk33)
        assert report.well_weights[1] == pytest.approx(0.5)
        assert report.well_weights[2] == pytest.approx(0.5)
        assert report.lro == pytest.approx(1.0)
        assert report.magnetizations == {1: pytest.approx(1.0), 2: pytest.approx(-1.0)}
        assert report.symmetric
        assert report.verdict
        assert report.L_star >= 1

    def test_symmetric_ground_state(self, H33, desk33, tfim33):
        psi = lowest_eigenpairs(H33, 1, 'even').ground_state
        report = ssb_report(psi, desk33, tfim33)
        assert report.well_weights[1] == pytest.approx(report.well_weights[2], abs=1e-10)
        assert report.total_weight == pytest.approx(1.0)
        assert report.symmetric

    def test_broken_state_flagged(self, desk33):
        psi = np.zeros(512)
        psi[0] = 1.0
        report = ssb_report(psi, desk33, with_separation=False)
        assert not report.symmetric
        assert not report.verdict
        assert report.notes

    def test_tilt_selects_negative_well(self, tfim33, desk33):
        flat = tilted_ground_overlap(tfim33, 0.0, desk33)
        for k in (1, 2):
            assert abs(flat.overlaps[k] - 1.0 / np.sqrt(2.0)) <= 1e-6
        tilted = tilted_ground_overlap(tfim33, 0.5, desk33)
        assert tilted.favoured == 2
        assert tilted.overlap > 0.9
        with pytest.raises(ValueError):
            tilted_ground_overlap(tfim33, -0.1, desk33)


def test_state_file(tmp_path, H33):
    psi = lowest_eigenpairs(H33, 1, 'even').ground_state
    path = str(tmp_path / 'state.bin')
    save_state(path, psi, 9, sector=1)
    loaded, n_sites, sector = load_state(path)
    np.testing.assert_array_equal(loaded, psi)
    assert (n_sites, sector) == (9, 1)
    with pytest.raises(StructureError):
        save_state(path, psi[:10], 9)
