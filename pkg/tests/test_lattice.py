import numpy as np
import pytest

from emtopo.errors import EmptySet, SingularBasis
from emtopo.lattice import (
    KGrid,
    Lattice,
    bz_grid,
    bz_path,
    plane_wave_set,
    reciprocal_basis,
)

TWO_PI = 2 * np.pi


class TestReciprocalBasis:
    def test_cubic(self):
        lat = Lattice.cubic()
        assert np.allclose(lat.reciprocal, TWO_PI * np.eye(3))

    def test_square(self):
        lat = Lattice.square()
        b = lat.reciprocal
        assert np.allclose(b[0], [TWO_PI, 0, 0])
        assert np.allclose(b[1], [0, TWO_PI, 0])

    def test_hexagonal_duality(self):
        lat = Lattice.hexagonal()
        b = reciprocal_basis(lat)
        # numerically verify a_i . b_j = 2 pi delta_ij
        assert np.allclose(lat.basis @ b.T, TWO_PI * np.eye(3), atol=1e-12)
        assert np.allclose(b[0], TWO_PI * np.array([1.0, -1.0 / np.sqrt(3), 0.0]))
        assert np.allclose(b[1], TWO_PI * np.array([0.0, 2.0 / np.sqrt(3), 0.0]))

    def test_double_reciprocal_is_identity(self):
        lat = Lattice.hexagonal()
        twice = 2 * np.pi * np.linalg.inv(lat.reciprocal).T
        assert np.allclose(twice, lat.basis, atol=1e-12)

    def test_singular_basis_rejected(self):
        with pytest.raises(SingularBasis):
            Lattice.from_vectors([[1.0, 0.0], [2.0, 0.0]])


class TestPlaneWaveSet:
    def test_cutoff_half_keeps_only_origin(self):
        pws = plane_wave_set(Lattice.cubic(), 0.5 * TWO_PI)
        assert pws.indices == ((0, 0, 0),)

    def test_cutoff_one_gives_seven(self):
        pws = plane_wave_set(Lattice.cubic(), 1.0 * TWO_PI)
        assert len(pws) == 7

    def test_cutoff_sqrt2_gives_nineteen(self):
        # brute-force oracle: integer triples with |n| <= sqrt(2)
        expected = sum(
            1
            for i in range(-2, 3)
            for j in range(-2, 3)
            for k in range(-2, 3)
            if i * i + j * j + k * k <= 2
        )
        pws = plane_wave_set(Lattice.cubic(), np.sqrt(2) * TWO_PI)
        assert len(pws) == expected == 19

    def test_closed_under_negation(self):
        pws = plane_wave_set(Lattice.hexagonal(), 3.2 * TWO_PI)
        members = set(pws.indices)
        assert all(tuple(-x for x in n) in members for n in pws.indices)
        neg = pws.negation_index
        for i, n in enumerate(pws.indices):
            assert pws.indices[neg[i]] == tuple(-x for x in n)

    def test_lexicographic_and_deterministic(self):
        a = plane_wave_set(Lattice.square(), 2.3 * TWO_PI)
        b = plane_wave_set(Lattice.square(), 2.3 * TWO_PI)
        assert a.indices == b.indices == tuple(sorted(a.indices))

    def test_empty_set_raised_only_on_request(self):
        lat = Lattice.cubic()
        assert len(plane_wave_set(lat, 0.1 * TWO_PI)) == 1
        with pytest.raises(EmptySet):
            plane_wave_set(lat, 0.1 * TWO_PI, require_nontrivial=True)

    def test_shift_index(self):
        pws = plane_wave_set(Lattice.square(), 1.0 * TWO_PI)
        table = pws.shift_index((1, 0, 0))
        for i, n in enumerate(pws.indices):
            target = (n[0] + 1, n[1], n[2])
            j = table[i]
            if j >= 0:
                assert pws.indices[j] == target
            else:
                assert pws.index_of(target) is None


class TestPaths:
    def test_gamma_x_three_samples(self):
        path = bz_path(Lattice.square(), ["G", "X"], 3)
        assert np.allclose(path.points[:, 0], [0.0, 0.25, 0.5])
        assert np.allclose(path.points[:, 1:], 0.0)

    def test_waypoints_deduplicated(self):
        path = bz_path(Lattice.square(), ["G", "X", "M"], 3)
        assert len(path) == 5
        assert np.allclose(path.points[2], [0.5, 0, 0])

    def test_arclength_monotone(self):
        path = bz_path(Lattice.hexagonal(), ["G", "M", "K", "G"], 8)
        assert np.all(np.diff(path.arclength) > 0)

    def test_raw_coordinates_accepted(self):
        path = bz_path(Lattice.cubic(), [(0, 0, 0), (0.5, 0.5, 0.5)], 2)
        assert np.allclose(path.points[-1], [0.5, 0.5, 0.5])

    def test_unknown_label_raises(self):
        with pytest.raises(KeyError):
            bz_path(Lattice.square(), ["G", "K"], 3)  # K is hexagonal-only


class TestGrids:
    def test_two_by_two_points(self):
        grid = bz_grid(Lattice.square(), 2, 2)
        pts = grid.points_reduced()
        expected = {(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)}
        assert {(p[0], p[1]) for p in pts} == expected

    def test_wraparound_neighbor(self):
        grid = bz_grid(Lattice.square(), 4, 3)
        last = grid.flat_index((3, 1))
        nbr, wrapped = grid.neighbor(last, 0)
        assert wrapped and grid.multi_index(nbr) == (0, 1)
        inner, wrapped = grid.neighbor(grid.flat_index((1, 1)), 0)
        assert not wrapped and grid.multi_index(inner) == (2, 1)

    def test_every_point_has_2d_wraparound_neighbors(self):
        grid = bz_grid(Lattice.square(), 3, 3)
        for m in range(grid.size):
            for axis in range(2):
                nbr, _ = grid.neighbor(m, axis)
                assert 0 <= nbr < grid.size

    def test_plaquette_loop_closes(self):
        # going +1 along an axis N times returns to the start
        grid = bz_grid(Lattice.square(), 5, 4)
        for axis, n in ((0, 5), (1, 4)):
            m = grid.flat_index((2, 1))
            for _ in range(n):
                m, _ = grid.neighbor(m, axis)
            assert m == grid.flat_index((2, 1))

    def test_offsets_freeze_axis(self):
        grid = KGrid(Lattice.cubic(), (4, 4, 1), offsets=(0.0, 0.0, 0.25))
        pts = grid.points_reduced()
        assert np.allclose(pts[:, 2], 0.25)
        assert grid.periodic_axes() == (0, 1)
