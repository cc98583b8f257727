import math

import numpy as np
import pytest
from scipy import stats

from activeband.dyadic import DyadicCover
from activeband.problems import (
    builtin_problems,
    constant_problem,
    draw_sample,
    get_problem,
    pi_measure,
    sample_x,
    sample_y,
    uniform_marginal,
)

RNG = np.random.default_rng


@pytest.fixture(scope="module")
def catalog():
    return builtin_problems()


def test_catalog_names(catalog):
    assert set(catalog) == {"ramp1d", "tent1d", "gradient2d", "convex1d",
                            "offset1d", "minimax"}
    with pytest.raises(KeyError):
        get_problem("nope")


def test_recorded_constants(catalog):
    ramp = catalog["ramp1d"]
    assert ramp.gamma == 1.0 and ramp.noise_B == 1.0
    assert ramp.holder_B1 == 2.0
    assert ramp.assumption2_B2 == pytest.approx(1.0 / 3.0)
    for p in catalog.values():
        u1, u2 = p.regularity
        assert 0 < u1 <= u2
        if "upper-bound-regime" in p.tags:
            assert p.beta * p.gamma <= p.dim


class TestMeasure:
    def test_full_cover_has_mass_one(self, catalog):
        for p in catalog.values():
            assert pi_measure(p, p.full_cover()) == pytest.approx(1.0, abs=1e-12)

    def test_uniform_single_cube(self, catalog):
        p = catalog["gradient2d"]
        cover = DyadicCover.from_coords(3, 2, [[5, 2]])
        assert pi_measure(p, cover) == pytest.approx(2.0 ** -6, abs=1e-15)

    def test_minimax_cell_mass(self, catalog):
        # each perturbed construction cell carries mass exactly q^-d
        p = catalog["minimax"]
        from activeband.minimax import build_geometry, make_bump_params

        params = make_bump_params()
        geom = build_geometry(params)
        for cell in geom.s_cells[:3]:
            cover = DyadicCover.from_coords(params.level, 1, [cell])
            assert pi_measure(p, cover) == pytest.approx(
                params.q ** -1.0, abs=1e-12)

    def test_empty_cover(self, catalog):
        p = catalog["ramp1d"]
        assert pi_measure(p, DyadicCover(3, 1, ())) == 0.0


class TestSampling:
    def test_conditional_mean_on_half_interval(self, catalog):
        p = catalog["ramp1d"]
        cover = DyadicCover.from_coords(1, 1, [[0]])
        xs = sample_x(p, cover, RNG(7), size=100_000)
        assert np.all((xs >= 0) & (xs < 0.5))
        assert xs.mean() == pytest.approx(0.25, abs=0.005)

    def test_cube_frequencies_multinomial(self, catalog):
        p = catalog["ramp1d"]
        m, n = 2, 100_000
        xs = sample_x(p, p.full_cover(), RNG(8), size=n)
        counts = np.bincount((xs[:, 0] * 4).astype(int), minlength=4)
        expect = n / 4
        sigma = math.sqrt(n * 0.25 * 0.75)
        assert np.all(np.abs(counts - expect) <= 3 * sigma)

    def test_zero_mass_cover_raises(self, catalog):
        p = catalog["minimax"]
        # the gap cells between the block and the outer region carry no mass
        empty = DyadicCover.from_coords(4, 1, [[8]])
        assert pi_measure(p, empty) == 0.0
        with pytest.raises(ValueError, match="empty conditional"):
            sample_x(p, empty, RNG(0))

    def test_chi_square_sampler_measure_consistency(self, catalog):
        p = catalog["minimax"]
        cover = p.support_cover()
        n = 100_000
        xs = sample_x(p, cover, RNG(9), size=n)
        masses = p.marginal.cube_masses(cover.level, cover.coords_array)
        from activeband.dyadic import cube_coords, ravel_coords

        flat = ravel_coords(cube_coords(xs, cover.level), cover.level)
        ids = cover.flat_ids
        pos = np.searchsorted(ids, flat)
        counts = np.bincount(pos, minlength=len(ids))
        expect = n * masses / masses.sum()
        chi2 = float(((counts - expect) ** 2 / expect).sum())
        dof = len(ids) - 1
        assert chi2 <= stats.chi2.ppf(0.99, dof)

    def test_single_draw_shape(self, catalog):
        p = catalog["gradient2d"]
        x = sample_x(p, p.full_cover(), RNG(1))
        assert x.shape == (2,)


class TestLabels:
    def test_deterministic_labels(self):
        up = constant_problem(1.0)
        down = constant_problem(-1.0)
        xs = RNG(2).random((500, 1))
        assert np.all(sample_y(up, xs, RNG(3)) == 1)
        assert np.all(sample_y(down, xs, RNG(3)) == -1)

    def test_fair_coin_at_zero(self):
        p = constant_problem(0.0)
        xs = RNG(4).random((100_000, 1))
        ys = sample_y(p, xs, RNG(5))
        assert set(np.unique(ys)) == {-1, 1}
        assert abs(ys.mean()) <= 0.01

    def test_scalar_label(self):
        p = constant_problem(1.0)
        assert sample_y(p, np.array([0.5]), RNG(0)) == 1

    def test_draw_sample_batches(self, catalog):
        p = catalog["tent1d"]
        s = draw_sample(p, p.full_cover(), 256, RNG(6), RNG(7))
        assert s.xs.shape == (256, 1) and s.ys.shape == (256,)
        assert set(np.unique(s.ys)) <= {-1, 1}


def test_tent_bayes_risk_closed_form(catalog):
    # R* = integral of (1 - |eta|)/2 = 1/4 for the tent
    p = catalog["tent1d"]
    pts, masses = p.marginal.quadrature(14)
    bayes = float(np.sum(masses * (1.0 - np.abs(p.eta(pts))) / 2.0))
    assert bayes == pytest.approx(0.25, abs=1e-6)


def test_low_noise_certificates(catalog):
    for p in catalog.values():
        lvl = 14 if p.dim == 1 else 8
        lvl = max(lvl, p.marginal.level)
        pts, masses = p.marginal.quadrature(lvl)
        a = np.abs(p.eta(pts))
        atol = p.dim * 2.0 ** (1 - lvl)
        for t in np.arange(0.05, 0.51, 0.05):
            assert masses[a <= t].sum() <= p.noise_B * t ** p.gamma + atol, (
                p.name, t)


def test_regularity_certificates(catalog):
    for p in catalog.values():
        u1, u2 = p.regularity
        spec = p.marginal
        for m in range(1, 11):
            lvl = min(m, spec.level)
            if m <= spec.level:
                masses = spec._mass_tables[m]
                pos = masses[masses > 0]
            else:
                dens = np.asarray(list(spec.densities.values()))
                pos = dens * 2.0 ** (-p.dim * m)
            ratios = pos * 2.0 ** (p.dim * m)
            assert ratios.min() >= u1 - 1e-9, (p.name, m)
            assert ratios.max() <= u2 + 1e-9, (p.name, m)


def test_marginal_mass_normalization():
    with pytest.raises(ValueError, match="total mass"):
        from activeband.problems import piecewise_marginal

        piecewise_marginal(1, 1, {(0,): 1.0, (1,): 0.5})


def test_constant_problem_validation():
    with pytest.raises(ValueError):
        constant_problem(1.5)
    assert math.isinf(constant_problem(0.0).noise_B)
