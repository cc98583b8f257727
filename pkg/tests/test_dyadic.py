import numpy as np
import pytest

from activeband.dyadic import (
    ConfidenceBand,
    CubeIndex,
    DyadicCover,
    PiecewiseConstantFn,
    cube_coords,
    cube_of_point,
    refine,
    sign_crossing_set,
    sign_pm,
)


def test_sign_convention():
    assert sign_pm(0.0) == 1
    assert sign_pm(-0.0) == 1
    assert sign_pm(-1e-300) == -1
    assert list(sign_pm(np.array([-2.0, 0.0, 3.0]))) == [-1, 1, 1]


class TestCubeOfPoint:
    def test_interior(self):
        assert cube_of_point([0.3], 1).coords == (0,)

    def test_closed_outer_face(self):
        assert cube_of_point([1.0], 1).coords == (1,)

    def test_2d(self):
        assert cube_of_point([0.3, 0.8], 2).coords == (1, 3)

    def test_outside_domain(self):
        with pytest.raises(ValueError):
            cube_of_point([1.2], 3)
        with pytest.raises(ValueError):
            cube_of_point([-0.1], 3)

    def test_partition_property(self):
        # the cube returned for a point actually contains it, for many
        # random points and levels
        rng = np.random.default_rng(12)
        for d, m in [(1, 0), (1, 5), (2, 3), (3, 2)]:
            pts = rng.random((25_000, d))
            coords = cube_coords(pts, m)
            lower = coords / (1 << m)
            upper = (coords + 1) / (1 << m)
            assert np.all(pts >= lower) and np.all(pts < upper)

    def test_cube_contains_is_consistent(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            x = rng.random(2)
            cube = cube_of_point(x, 4)
            assert cube.contains(x)


class TestCover:
    def test_full_cover_tiles(self):
        cover = DyadicCover.full(2, 3)
        assert cover.n_cubes == 64
        assert cover.volume() == pytest.approx(1.0)
        rng = np.random.default_rng(0)
        assert cover.contains_points(rng.random((1000, 2))).all()

    def test_sorted_and_unique(self):
        cover = DyadicCover.from_coords(2, 1, [[3], [0], [3], [1]])
        assert [c.coords for c in cover.cubes] == [(0,), (1,), (3,)]

    def test_validation(self):
        with pytest.raises(ValueError):
            DyadicCover(1, 1, (CubeIndex(2, (0,)),))
        with pytest.raises(ValueError):
            DyadicCover(1, 1, (CubeIndex(1, (1,)), CubeIndex(1, (0,))))

    def test_refine_and_ancestors(self):
        cover = DyadicCover.from_coords(1, 1, [[1]])
        fine = cover.refine(3)
        assert [c.coords for c in fine.cubes] == [(4,), (5,), (6,), (7,)]
        assert fine.ancestor_coords(1).tolist() == [[1]]

    def test_membership(self):
        cover = DyadicCover.from_coords(2, 1, [[0], [3]])
        mask = cover.contains_points(np.array([[0.1], [0.3], [0.8]]))
        assert mask.tolist() == [True, False, True]


class TestPiecewiseConstant:
    def test_constant_refine(self):
        f = PiecewiseConstantFn.constant(1, 0.5)
        g = refine(f, 2)
        assert g.level == 2
        assert all(v == 0.5 for v in g.coeffs.values())
        assert len(g.coeffs) == 4

    def test_refine_two_cubes(self):
        f = PiecewiseConstantFn(1, 1, {(0,): -1.0, (1,): 1.0})
        g = refine(f, 2)
        assert [g.coeffs[(i,)] for i in range(4)] == [-1.0, -1.0, 1.0, 1.0]

    def test_refine_identity(self):
        f = PiecewiseConstantFn(2, 1, {(1,): 0.25})
        assert refine(f, 2) is f

    def test_refine_rejects_coarsening(self):
        f = PiecewiseConstantFn(2, 1, {(1,): 0.25})
        with pytest.raises(ValueError):
            refine(f, 1)

    def test_refinement_pointwise_exact(self):
        rng = np.random.default_rng(21)
        for d in (1, 2):
            m = int(rng.integers(0, 4))
            keys = DyadicCover.full(d, m).coords_array
            coeffs = {tuple(int(v) for v in k): float(u)
                      for k, u in zip(keys, rng.uniform(-1, 1, len(keys)))}
            f = PiecewiseConstantFn(m, d, coeffs)
            g = refine(f, m + int(rng.integers(1, 3)))
            pts = rng.random((10_000, d))
            assert np.array_equal(f(pts), g(pts))

    def test_absent_is_zero(self):
        f = PiecewiseConstantFn(2, 1, {(3,): 1.0})
        assert f(np.array([0.1])) == 0.0
        assert f(np.array([0.9])) == 1.0

    def test_range_validation(self):
        with pytest.raises(ValueError):
            PiecewiseConstantFn(0, 1, {(0,): 1.5})


class TestSignCrossing:
    def _band(self, center_val, delta, level=0):
        center = PiecewiseConstantFn.constant(1, center_val, level)
        return ConfidenceBand(center, delta, DyadicCover.full(1, level), center)

    def test_constant_sign_band_is_empty(self):
        assert sign_crossing_set(self._band(0.5, 0.2), 3).n_cubes == 0

    def test_straddling_band_is_full(self):
        assert sign_crossing_set(self._band(0.1, 0.2), 3).n_cubes == 8

    def test_zero_width_band_never_crosses(self):
        assert sign_crossing_set(self._band(0.0, 0.0), 2).n_cubes == 0

    def test_brute_force_on_ramp_averages(self):
        # center = per-cube average of 2x - 1 at level 3, delta = 0.25;
        # enumerate the eight cubes directly with the sign convention
        m, delta = 3, 0.25
        centers = (np.arange(8) + 0.5) / 8
        vals = 2 * centers - 1
        f = PiecewiseConstantFn(m, 1, {(i,): float(v) for i, v in enumerate(vals)})
        band = ConfidenceBand(f, delta, DyadicCover.full(1, m), f)
        got = {c.coords[0] for c in sign_crossing_set(band, m).cubes}
        expected = {i for i, v in enumerate(vals)
                    if sign_pm(v - delta) != sign_pm(v + delta)}
        assert got == expected == {3, 4}

    def test_monotone_in_width(self):
        rng = np.random.default_rng(3)
        m = 4
        vals = rng.uniform(-1, 1, 16)
        f = PiecewiseConstantFn(m, 1, {(i,): float(v) for i, v in enumerate(vals)})
        domain = DyadicCover.full(1, m)
        prev: set = set()
        for delta in (0.05, 0.2, 0.5, 0.9):
            band = ConfidenceBand(f, delta, domain, f)
            cur = {c.coords for c in sign_crossing_set(band, m).cubes}
            assert prev <= cur
            prev = cur

    def test_outside_domain_never_included(self):
        f = PiecewiseConstantFn.constant(1, 0.0, 0)
        domain = DyadicCover.from_coords(1, 1, [[0]])
        band = ConfidenceBand(refine(f, 1), 0.5, domain, f)
        got = sign_crossing_set(band, 2)
        assert {c.coords[0] for c in got.cubes} == {0, 1}

    def test_band_validation(self):
        f = PiecewiseConstantFn.constant(1, 0.0)
        with pytest.raises(ValueError):
            ConfidenceBand(f, -0.1, DyadicCover.full(1, 0), f)

    def test_band_evaluation(self):
        center = PiecewiseConstantFn.constant(1, 0.4, 0)
        outside = PiecewiseConstantFn.constant(1, -0.9, 0)
        band = ConfidenceBand(refine(center, 1), 0.1,
                              DyadicCover.from_coords(1, 1, [[0]]), outside)
        pts = np.array([[0.2], [0.8]])
        assert band.lower(pts).tolist() == pytest.approx([0.3, -0.9])
        assert band.upper(pts).tolist() == pytest.approx([0.5, -0.9])
