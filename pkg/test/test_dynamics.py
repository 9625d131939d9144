import time

import numpy as np
import pandas as pd
import pytest
from scipy.linalg import expm

from peierls_lab.dynamics.evolution import (
    DriftReport, check_time_grid, evolve, evolve_trajectory, observable_drift,
)
from peierls_lab.dynamics.metastability import (
    EvolutionJob, LifetimeReport, block_magnetization, block_sites, box_region, false_vacuum_point,
    heisenberg_distance, lifetime_from_drift, lifetimes_monotone, local_simulatability_error, restricted_vs_full,
    ring_model,
)
from peierls_lab.errors import EvolutionError, LatticeError, StructureError
from peierls_lab.quantum.diagnostics import well_projectors
from peierls_lab.quantum.eigen import lowest_eigenpairs, restricted_ground_state
from peierls_lab.quantum.model import build_quantum_hamiltonian, order_parameter_diagonal, region_hamiltonian, tfim_model


@pytest.fixture(scope='module')
def H33(tfim33):
    return build_quantum_hamiltonian(tfim33)


@pytest.fixture
def random_state():
    psi = np.random.default_rng(11).standard_normal(512) + 0j
    return psi / np.linalg.norm(psi)


class TestEvolve:
    def test_matches_matrix_exponential(self, H33, random_state):
        expected = expm(-1j * 0.7 * H33.dense()) @ random_state
        np.testing.assert_allclose(evolve(random_state, H33, 0.7), expected, atol=1e-8)

    def test_forward_then_back(self, H33, random_state):
        there = evolve(random_state, H33, 1.3)
        np.testing.assert_allclose(evolve(there, H33, -1.3), random_state, atol=1e-8)

    def test_zero_time(self, H33, random_state):
        np.testing.assert_array_equal(evolve(random_state, H33, 0.0), random_state)

    def test_unnormalized_input(self, H33, random_state):
        with pytest.raises(EvolutionError):
            evolve(2.0 * random_state, H33, 0.1)

    @pytest.mark.parametrize('grid', [[], [-1.0, 0.0], [0.0, 1.0, 1.0], [[0.0, 1.0]]])
    def test_bad_time_grid(self, grid):
        with pytest.raises(ValueError):
            check_time_grid(grid)

    def test_trajectory_conserves_energy(self, H33, random_state):
        traj = evolve_trajectory(random_state, H33, [0.0, 0.5, 1.0, 2.0], {'A': order_parameter_diagonal(9)})
        assert traj.energy_drift < 1e-8
        frame = traj.to_frame()
        assert list(frame.columns) == ['t', 'A']
        assert len(frame) == 4

    def test_sector_path_matches_full(self, H33, random_state):
        grid = [0.0, 0.4, 1.5, 3.0]
        Z0 = 1.0 - 2.0 * (np.arange(512) & 1)
        split = evolve_trajectory(random_state, H33, grid, {'Z0': Z0}, sectors=True, keep_states=True)
        whole = evolve_trajectory(random_state, H33, grid, {'Z0': Z0}, sectors=False, keep_states=True)
        np.testing.assert_allclose(split.values['Z0'], whole.values['Z0'], atol=1e-8)
        np.testing.assert_allclose(split.states[-1], whole.states[-1], atol=1e-8)
        np.testing.assert_allclose(split.energies, whole.energies, atol=1e-8)

    def test_sector_path_needs_flip_symmetry(self, random33, random_state):
        H = build_quantum_hamiltonian(tfim_model(random33, 0.2))
        assert not H.symmetric
        with pytest.raises(StructureError):
            evolve_trajectory(random_state, H, [0.0, 1.0], sectors=True)
        assert evolve_trajectory(random_state, H, [0.0, 1.0]).energy_drift < 1e-8


class TestDrift:
    def test_basis_state(self, H33):
        psi = np.zeros(512)
        psi[0] = 1.0
        report = observable_drift(psi, H33, order_parameter_diagonal(9), np.linspace(0, 2, 9))
        assert report.holds
        assert report.delta == pytest.approx(3 * 0.3)
        assert report.drift[0] < 1e-12

    def test_eigenstate_does_not_move(self, H33):
        psi = lowest_eigenpairs(H33, 1, 'even').ground_state
        report = observable_drift(psi, H33, order_parameter_diagonal(9), [0.0, 1.0, 5.0])
        assert report.delta < 1e-8
        assert report.drift.max() < 1e-7

    def test_csv(self, H33, tmp_path):
        psi = np.zeros(512)
        psi[0] = 1.0
        report = observable_drift(psi, H33, order_parameter_diagonal(9), [0.0, 0.5])
        path = tmp_path / 'drift.csv'
        report.write_csv(str(path), config_hash='abc123')
        frame = pd.read_csv(path)
        assert list(frame.columns) == ['t', 'observable', 'drift', 'bound', 'config_hash']
        assert (frame['config_hash'] == 'abc123').all()

    def test_long_drift_stays_fast(self, tfim43):
        H = build_quantum_hamiltonian(tfim43)
        psi = np.zeros(H.dim)
        psi[0] = 1.0
        start = time.perf_counter()
        report = observable_drift(psi, H, order_parameter_diagonal(12), np.linspace(0.0, 100.0, 21))
        assert time.perf_counter() - start < 60.0
        assert report.holds


class TestRegions:
    def test_box(self, lat43):
        assert len(box_region(lat43, [0], 1)) == 9
        assert len(box_region(lat43, [0], 2)) == 12
        assert 3 in box_region(lat43, [0], 1)

    def test_block(self, lat4):
        assert block_sites(lat4) == [0, 1, 4, 5]
        O = block_magnetization(16, [0, 1, 4, 5])
        assert np.abs(O).max() == 1.0
        assert O[1] == pytest.approx(0.5)

    def test_job_validation(self, tfim33):
        with pytest.raises(LatticeError):
            EvolutionJob(tfim33, [0.0, 1.0], B=[])
        with pytest.raises(LatticeError):
            EvolutionJob(tfim33, [0.0, 1.0], B=[12])
        assert EvolutionJob(tfim33, [0.0, 1.0], B=[0]).is_full


class TestLocalSimulatability:
    def test_shrinks_with_region(self):
        model = ring_model(8, eps=1.0)
        errors = [local_simulatability_error(model, [0], R, 1.0) for R in (1, 2, 3, 4)]
        assert errors[2] < errors[0]
        assert errors[3] == pytest.approx(0.0, abs=1e-10)

    def test_zero_time(self):
        assert local_simulatability_error(ring_model(6), [0], 1, 0.0) == 0.0


def test_restricted_matches_full(tfim33, desk33):
    job = EvolutionJob(tfim33, [0.0, 0.5, 1.0, 2.0], B=[0, 1, 3, 4])
    report = restricted_vs_full(job, 1, desk33)
    assert report.holds
    assert report.region_size == 9
    assert report.delta_LR.max() == 0.0
    assert report.delta_prime < 1e-10
    assert report.full[0] == pytest.approx(report.restricted[0])
    assert set(report.summary()) >= {'max_deviation', 'holds'}


def test_restricted_on_sub_region(tfim33, desk33):
    times = [0.0, 0.5, 1.0, 2.0]
    job = EvolutionJob(tfim33, times, B=[0, 1], R_B=0)
    assert not job.is_full
    report = restricted_vs_full(job, 1, desk33)
    assert report.region_size == 2
    assert report.delta_LR_kind == 'operator'
    assert report.delta_LR[0] < 1e-10
    assert report.delta_LR[-1] > 0
    assert report.holds
    # the operator norm dominates the difference seen by any single state
    H_A = region_hamiltonian(tfim33, job.region)
    local = evolve_trajectory(well_ground_state(tfim33, desk33), H_A, times, {'O': job.observable}).values['O']
    assert np.all(np.abs(report.full - local) <= report.delta_LR + 1e-8)


def well_ground_state(model, bs):
    H = build_quantum_hamiltonian(model)
    return restricted_ground_state(H, well_projectors(bs).well(1))[0].state


def test_heisenberg_distance_paths(tfim33):
    H = build_quantum_hamiltonian(tfim33).dense()
    H_A = region_hamiltonian(tfim33, [0, 1, 3, 4]).dense()
    O = block_magnetization(9, [0])
    dense = heisenberg_distance(H, H_A, O, [0.0, 0.7])
    assert dense[0] == 0.0

    def heisenberg(K):
        U = expm(-1j * 0.7 * K)
        return U.conj().T @ np.diag(O) @ U

    diff = heisenberg(H) - heisenberg(H_A)
    assert dense[1] == pytest.approx(np.linalg.norm(diff, ord=2), abs=1e-8)
    assert heisenberg_distance(H, H, O, [0.7])[0] < 1e-10


def test_heisenberg_distance_iterative_norm(tfim33, monkeypatch):
    H = build_quantum_hamiltonian(tfim33).dense()
    H_A = region_hamiltonian(tfim33, [0, 1, 3, 4]).dense()
    O = block_magnetization(9, [0])
    dense = heisenberg_distance(H, H_A, O, [0.7, 1.5])
    monkeypatch.setattr('peierls_lab.dynamics.metastability.DENSE_NORM_DIM', 0)
    np.testing.assert_allclose(heisenberg_distance(H, H_A, O, [0.7, 1.5]), dense, atol=1e-7)


class TestFalseVacuum:
    def test_point(self, lat33, desk33):
        report = false_vacuum_point(lat33, 0.2, 0.3, desk33, [0.0, 0.5, 1.0, 2.0])
        assert report.within_bound
        assert report.values[0] < 0
        assert report.drift[0] < 1e-12
        assert report.to_frame()['h'].eq(0.2).all()

    def test_lifetime_from_drift(self):
        assert lifetime_from_drift(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.05, 0.2])) == (2.0, False)
        assert lifetime_from_drift(np.array([0.0, 1.0]), np.array([0.0, 0.01])) == (1.0, True)

    def test_monotone(self):
        def report(h, lifetime):
            return LifetimeReport(h=h, times=np.zeros(1), values=np.zeros(1), drift=np.zeros(1),
                                  lifetime=lifetime, censored=False, delta=0.0, bound=np.zeros(1))

        assert lifetimes_monotone([report(0.4, 1.0), report(0.1, 5.0), report(0.2, 3.0)])
        assert not lifetimes_monotone([report(0.1, 1.0), report(0.2, 3.0)])
