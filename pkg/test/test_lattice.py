import numpy as np
import pytest

from peierls_lab.errors import BudgetExceededError, LatticeError
from peierls_lab.lattice.domain_walls import (
    OUT, WELL_1, WELL_2, BasisClassification, ConfigClass, classify_config, dw_decompose,
    hamming_separation, loop_interior, rebuild_config, sea_value,
)
from peierls_lab.lattice.loops import (
    canonical_key, enumerate_loops, export_loops, load_loops, loop_table, loops_through,
    sample_loops, shape_counts,
)
from peierls_lab.lattice.spins import flip_all, index_from_spins, spin_columns, spins_from_index
from peierls_lab.lattice.torus import TorusLattice, build_torus

from conftest import DESK


def flipped(lat, sites):
    z = np.ones(lat.n_sites, dtype=np.int8)
    z[list(sites)] = -1
    return z


class TestTorus:
    def test_sizes(self, lat4):
        assert lat4.n_sites == 16
        assert lat4.n_edges == 32

    @pytest.mark.parametrize('L0', [2, 5, 7])
    def test_bad_sizes_rejected(self, L0):
        with pytest.raises(LatticeError):
            build_torus(L0)

    def test_edge_indexing(self, lat4):
        assert lat4.h_edge(1, 2) == 9
        assert lat4.v_edge(1, 2) == 25
        assert tuple(lat4.edge_sites[9]) == (9, 10)
        assert tuple(lat4.edge_sites[25]) == (9, 13)

    def test_periodic_wrap(self, lat4):
        assert tuple(lat4.edge_sites[lat4.h_edge(3, 0)]) == (3, 0)
        assert tuple(lat4.edge_sites[lat4.v_edge(0, 3)]) == (12, 0)

    def test_every_site_has_four_edges(self, lat6):
        assert all(len(es) == 4 for es in lat6.site_edges)
        assert all(len(set(nb)) == 4 for nb in lat6.neighbors)

    def test_rectangular(self, lat43):
        assert lat43.n_sites == 12
        assert lat43.n_edges == 24
        assert lat43.coords(lat43.site(3, 2)) == (3, 2)


class TestSpins:
    def test_all_plus_is_zero(self):
        assert np.all(spins_from_index(0, 9) == 1)
        assert index_from_spins(np.ones(9)) == 0

    @pytest.mark.parametrize('index', [1, 5, 300, 511])
    def test_index_round_trip(self, index):
        assert index_from_spins(spins_from_index(index, 9)) == index

    def test_columns_match_single(self):
        cols = spin_columns(np.array([3, 6]), 4)
        np.testing.assert_array_equal(cols[0], spins_from_index(3, 4))
        np.testing.assert_array_equal(cols[1], spins_from_index(6, 4))

    def test_flip_all(self):
        assert flip_all(0, 4) == 15
        np.testing.assert_array_equal(spins_from_index(flip_all(5, 4), 4), -spins_from_index(5, 4))


class TestLoops:
    def test_shape_counts(self):
        assert shape_counts(8) == {4: 1, 6: 2, 8: 8}

    def test_unit_loops_on_6x6(self, lat6):
        assert len(enumerate_loops(lat6, 4)) == 36
        assert len(enumerate_loops(lat6, 4, anchor=0)) == 2

    def test_table_counts(self, lat6):
        table = loop_table(lat6, 6)
        assert len(table[4]) == 36
        assert len(table[6]) == 72

    def test_every_edge_in_two_unit_loops(self, lat6):
        table = loop_table(lat6, 4)
        assert loops_through(table, 7) == {4: 2}

    def test_budget(self, lat6):
        with pytest.raises(BudgetExceededError):
            enumerate_loops(lat6, 16)

    def test_canonical_key_ignores_order(self):
        assert canonical_key([5, 1, 9, 3]) == canonical_key([9, 3, 5, 1])

    def test_sampled_loops(self):
        lat = build_torus(8)
        loops = sample_loops(lat, 6, 10, 20, seed=1)
        assert loops
        assert all(6 <= lp.length <= 10 and lp.heuristic for lp in loops)
        assert len({lp.canonical_key for lp in loops}) == len(loops)
        again = sample_loops(lat, 6, 10, 20, seed=1)
        assert [lp.canonical_key for lp in again] == [lp.canonical_key for lp in loops]

    def test_export_load(self, lat6, tmp_path):
        loops = enumerate_loops(lat6, 6, anchor=3)
        path = tmp_path / 'loops.json'
        export_loops(loops, str(path))
        assert {lp.canonical_key for lp in load_loops(str(path))} == {lp.canonical_key for lp in loops}


class TestDomainWalls:
    def test_single_flip(self, lat4):
        z = flipped(lat4, [5])
        dec = dw_decompose(lat4, z)
        assert [lp.length for lp in dec.loops] == [4]
        assert dec.sea_value == 1
        assert loop_interior(lat4, dec.loops[0]) == [5]
        np.testing.assert_array_equal(rebuild_config(lat4, dec), z)

    def test_domino(self, lat4):
        dec = dw_decompose(lat4, flipped(lat4, [5, 6]))
        assert [lp.length for lp in dec.loops] == [6]

    def test_two_loops(self, lat6):
        z = flipped(lat6, [0, 3 + 6 * 3])
        dec = dw_decompose(lat6, z)
        assert sorted(lp.length for lp in dec.loops) == [4, 4]
        np.testing.assert_array_equal(rebuild_config(lat6, dec), z)

    def test_diagonal_pair_along_sw_ne_joins(self, lat6):
        # regions connect across the SW-NE diagonal, so the crossing joins both flips
        z = flipped(lat6, [lat6.site(2, 2), lat6.site(3, 3)])
        dec = dw_decompose(lat6, z)
        assert [lp.length for lp in dec.loops] == [8]
        assert loop_interior(lat6, dec.loops[0]) == sorted([lat6.site(2, 2), lat6.site(3, 3)])
        np.testing.assert_array_equal(rebuild_config(lat6, dec), z)

    def test_diagonal_pair_along_nw_se_splits(self, lat6):
        z = flipped(lat6, [lat6.site(2, 3), lat6.site(3, 2)])
        dec = dw_decompose(lat6, z)
        assert sorted(lp.length for lp in dec.loops) == [4, 4]
        np.testing.assert_array_equal(rebuild_config(lat6, dec), z)

    def test_sea_wraps_through_diagonal(self, lat6):
        # the plus sites only reach around the torus across the flipped NW-SE line
        line = [lat6.site(x, (3 - x) % 6) for x in range(6)]
        z = flipped(lat6, line)
        assert sea_value(lat6, z) == 1
        dec = dw_decompose(lat6, z)
        assert not dec.has_winding
        assert [lp.length for lp in dec.loops] == [4] * 6
        np.testing.assert_array_equal(rebuild_config(lat6, dec), z)

    def test_no_walls(self, lat4):
        dec = dw_decompose(lat4, -np.ones(16, dtype=np.int8))
        assert dec.loops == []
        assert dec.sea_value == -1

    def test_stripe_winds(self, lat4):
        z = flipped(lat4, range(4))
        dec = dw_decompose(lat4, z)
        assert dec.has_winding
        assert sea_value(lat4, z) is None

    def test_winding_loop_has_no_interior(self, lat4):
        dec = dw_decompose(lat4, flipped(lat4, range(4)))
        with pytest.raises(LatticeError):
            loop_interior(lat4, dec.loops[0])

    def test_classification(self, desk4, lat4):
        assert classify_config(flipped(lat4, []), desk4) == ConfigClass.well(1)
        assert classify_config(flipped(lat4, [5]), desk4) == ConfigClass.well(1)
        assert classify_config(-flipped(lat4, [5]), desk4) == ConfigClass.well(2)
        assert classify_config(flipped(lat4, [5, 6]), desk4) == ConfigClass.bottleneck(1)
        assert classify_config(flipped(lat4, range(4)), desk4) == ConfigClass.out()

    def test_class_codes(self):
        for code in range(5):
            assert ConfigClass.from_code(code).code == code
        assert str(ConfigClass.well(2)) == 'Well(2)'

    def test_hamming_separation(self):
        tags = np.array([WELL_1, OUT, OUT, WELL_2], dtype=np.uint8)
        classification = BasisClassification(tags=tags, max_loop=np.zeros(4, dtype=np.int16),
                                             winding=np.zeros(4, dtype=bool))
        assert hamming_separation(classification, 2, WELL_1, WELL_2) == 2
        assert hamming_separation(classification, 2, WELL_1, 4) is None

    def test_one_dimensional_lattice_rejected(self):
        with pytest.raises(LatticeError):
            dw_decompose(TorusLattice(4, 1), np.ones(4))


def test_desk_structure_is_square_desk(desk4):
    assert (desk4.L, desk4.bottleneck_cap) == (DESK['L'], DESK['cap'])
