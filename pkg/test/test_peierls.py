import json
import math

import numpy as np
import pytest

from peierls_lab.classical.couplings import CouplingField, DistributionSpec
from peierls_lab.classical.hamiltonian import ClassicalHamiltonian
from peierls_lab.errors import DistributionError, StructureError
from peierls_lab.lattice.loops import make_loop
from peierls_lab.peierls.barrier import (
    FOUR_FIFTHS, FULL, certify_family, exhaustive_barrier, iter_certificates, verify_barrier,
    worst_case_barrier, write_certificates,
)
from peierls_lab.peierls.chernoff import (
    chernoff_parameters, chernoff_rate, empirical_violation_rate, union_bound_rate, wilson_interval,
)
from peierls_lab.peierls.order_parameter import row_indicator_scan
from peierls_lab.peierls.structure import asymptotic_theta, audit_indicator_counts, build_bottleneck_structure


class TestStructure:
    def test_desk_family(self, desk4):
        assert len(desk4.indicator_table[4]) == 16
        assert len(desk4.indicator_table[6]) == 32
        assert max(desk4.indicator_table) == 8
        assert not desk4.heuristic
        assert desk4.theta == pytest.approx(5 * math.log(3))
        assert desk4.theta_audit == pytest.approx(math.log(desk4.n_indicators) / 4)

    def test_small_lattice_needs_overrides(self, lat4):
        with pytest.raises(StructureError):
            build_bottleneck_structure(lat4, R=1)

    def test_cap_below_L(self, lat4):
        with pytest.raises(StructureError):
            build_bottleneck_structure(lat4, overrides={'L': 6, 'cap': 4})

    def test_audit(self, desk4):
        audit = audit_indicator_counts(desk4)
        assert audit.passed
        assert [r['length'] for r in audit.rows] == [4, 6, 8]

    def test_indicator_lookup(self, desk4):
        first = desk4.indicator(0)
        assert first.length == 4
        with pytest.raises(StructureError):
            desk4.indicator(desk4.n_indicators)

    def test_asymptotic_theta(self):
        assert asymptotic_theta(2) == pytest.approx(10 * math.log(3))


class TestBarrier:
    def test_uniform_four_fifths(self):
        assert worst_case_barrier(np.ones(10), FOUR_FIFTHS)[0] == pytest.approx(6.0)
        assert worst_case_barrier(np.ones(10), FULL)[0] == pytest.approx(10.0)

    def test_five_link_loop(self):
        assert exhaustive_barrier([1, 1, 1, 1, 1], FOUR_FIFTHS) == pytest.approx(3.0)
        assert exhaustive_barrier([1, 1, 1, 1, 2], FOUR_FIFTHS) == pytest.approx(2.0)

    @pytest.mark.parametrize('seed', [0, 1, 2, 3])
    def test_sorted_worst_case_matches_exhaustive(self, seed):
        J = np.random.default_rng(seed).uniform(-0.5, 1.5, size=10)
        for occupancy in (FULL, FOUR_FIFTHS, '3/5'):
            assert worst_case_barrier(J, occupancy)[0] == pytest.approx(exhaustive_barrier(J, occupancy))

    def test_bad_occupancy(self):
        with pytest.raises(StructureError):
            worst_case_barrier(np.ones(4), 0)

    def test_uniform_family(self, uniform4, desk4):
        full = certify_family(uniform4, desk4, FULL, Delta=1.0)
        assert full.passed
        assert full.measured_delta == pytest.approx(1.0)
        partial = certify_family(uniform4, desk4, FOUR_FIFTHS, Delta=1.0)
        assert not partial.passed
        assert partial.measured_delta == pytest.approx(2 / 3)
        assert partial.per_length[8]['min_barrier'] == pytest.approx(6.0)

    def test_single_certificate(self, uniform4, desk4):
        loop = desk4.indicator(0)
        cert = verify_barrier(uniform4, desk4, loop, FULL, Delta=1.0)
        assert cert.passed
        assert cert.oracle_value == pytest.approx(cert.barrier_value)
        assert cert.to_dict()['pass'] is True

    def test_indicator_outside_range(self, uniform4, desk4, lat4):
        with pytest.raises(StructureError):
            verify_barrier(uniform4, desk4, make_loop(range(10)), FULL, Delta=1.0)

    def test_missing_delta(self, uniform4, lat4):
        bs = build_bottleneck_structure(lat4, overrides={'L': 4, 'cap': 4})
        with pytest.raises(StructureError):
            certify_family(uniform4, bs)

    def test_weak_bond_fails(self, lat4, desk4):
        J = np.ones(lat4.n_edges)
        J[0] = 0.1
        H = ClassicalHamiltonian(CouplingField(lattice=lat4, J=J))
        failures = list(iter_certificates(H, desk4, FULL, Delta=1.0, failures_only=True))
        assert failures
        assert all(0 in c.links for c in failures)
        assert all(not c.passed for c in failures)

    def test_certificate_file(self, uniform4, desk4, tmp_path):
        path = tmp_path / 'certificates.jsonl'
        n = write_certificates(str(path), iter_certificates(uniform4, desk4, FULL, Delta=1.0), {'config_hash': 'abc'})
        lines = path.read_text().splitlines()
        assert n == len(lines) == desk4.n_indicators
        assert all(json.loads(line)['config_hash'] == 'abc' for line in lines)

    def test_sampled_oracle(self, lat4, desk4):
        rng = np.random.default_rng(5)
        H = ClassicalHamiltonian(CouplingField(lattice=lat4, J=rng.uniform(-0.2, 1.5, lat4.n_edges)))
        certs = list(iter_certificates(H, desk4, FOUR_FIFTHS, Delta=0.0, with_oracle=True, oracle_sample=5, seed=2))
        checked = [c for c in certs if c.oracle_value is not None]
        assert len(checked) == 5
        assert all(c.oracle_agrees for c in checked)
        again = list(iter_certificates(H, desk4, FOUR_FIFTHS, Delta=0.0, with_oracle=True, oracle_sample=5, seed=2))
        assert [c.indicator for c in again if c.oracle_value is not None] == [c.indicator for c in checked]

    def test_oracle_disagreement_fails(self, uniform4, desk4, monkeypatch):
        monkeypatch.setattr('peierls_lab.peierls.barrier.exhaustive_barrier', lambda J, occ: float(np.sum(J)) - 1.0)
        certs = list(iter_certificates(uniform4, desk4, FULL, Delta=1.0, failures_only=True, with_oracle=True))
        assert len(certs) == desk4.n_indicators
        assert all(not c.oracle_agrees and not c.passed for c in certs)


class TestChernoff:
    def test_reference_point(self):
        report = chernoff_parameters(0.05, 0.3, 0.8, 0.1, 1.2)
        assert report.a == pytest.approx(1 / 9)
        assert report.chi == pytest.approx(0.027612, abs=1e-6)
        assert report.valid

    def test_rate_limit(self):
        assert chernoff_rate(0.0, 0.2) == pytest.approx(0.2)

    def test_ordering_enforced(self):
        with pytest.raises(DistributionError):
            chernoff_parameters(0.05, 0.8, 0.3, 0.1, 1.2)

    def test_vacuous_against_theta(self):
        report = chernoff_parameters(0.05, 0.3, 0.8, 0.1, 1.2, theta=1.0, L=4)
        assert not report.valid
        assert report.bound == math.inf

    def test_union_bound(self):
        report = chernoff_parameters(0.05, 0.3, 0.8, 0.1, 1.2)
        assert union_bound_rate(report, {4: 16}) == pytest.approx(16 * math.exp(-4 * report.chi))

    def test_wilson(self):
        lo, hi = wilson_interval(0, 10)
        assert lo == 0.0
        assert 0.0 < hi < 0.5

    def test_violation_extremes(self, lat4, desk4):
        clean = empirical_violation_rate(DistributionSpec.two_point(1.0, 0.1, 0.0), lat4, desk4, 0.3, 5)
        assert clean.n_violations == 0
        dirty = empirical_violation_rate(DistributionSpec.two_point(1.0, 0.1, 1.0), lat4, desk4, 0.3, 5)
        assert dirty.rate == 1.0


def test_row_scan(lat6):
    z = np.ones(36, dtype=np.int8)
    z[[0, 1]] = -1
    scan = row_indicator_scan(lat6, z)
    assert scan.row == 0
    assert scan.total_length == 6
    assert (scan.n_plus, scan.n_minus) == (4, 2)
    assert row_indicator_scan(lat6, np.ones(36)) is None
