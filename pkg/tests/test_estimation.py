import math

import numpy as np
import pytest

from activeband.dyadic import DyadicCover, PiecewiseConstantFn
from activeband.estimation import (
    bernstein_deviation,
    bernstein_threshold,
    empirical_mean_fit,
    empirical_risk,
    fit_histogram,
    l2_projection,
    restricted_dimension,
)
from activeband.problems import (
    LabeledSample,
    builtin_problems,
    constant_problem,
    draw_sample,
    pi_measure,
)

RNG = np.random.default_rng


def _sample(xs, ys):
    return LabeledSample(np.asarray(xs, dtype=float).reshape(len(ys), -1),
                         np.asarray(ys, dtype=np.int64))


class TestFitHistogram:
    def test_single_cube_direct_formula(self):
        p = constant_problem(0.5)
        full = p.full_cover()
        s = _sample([[0.1], [0.3], [0.6], [0.9]], [1, 1, -1, 1])
        fit = fit_histogram(s, 0, full, p)
        assert fit.coeffs == {(0,): 0.5}

    def test_sure_labels_hit_one(self):
        p = constant_problem(1.0)
        full = p.full_cover()
        s = draw_sample(p, full, 64, RNG(0), RNG(1))
        fit = fit_histogram(s, 0, full, p)
        assert fit.coeffs == {(0,): 1.0}

    def test_empty_cover_rejected(self):
        p = constant_problem(0.5)
        with pytest.raises(ValueError):
            fit_histogram(_sample([[0.5]], [1]), 0, DyadicCover(0, 1, ()), p)

    def test_clamping(self):
        # two points in one of four cubes: raw value 2 * 4 / 4 = 2, clamped
        p = constant_problem(0.5)
        full = p.full_cover()
        s = _sample([[0.1], [0.2]], [1, 1])
        fit = fit_histogram(s, 2, full, p)
        assert fit.coeffs == {(0,): 1.0}

    def test_zero_mass_cubes_get_zero(self):
        mm = builtin_problems()["minimax"]
        s = draw_sample(mm, mm.support_cover(), 512, RNG(2), RNG(3))
        fit = fit_histogram(s, 4, mm.full_cover(), mm)
        # the gap cells carry no marginal mass and no samples
        assert fit((np.array([[0.53]]))) == 0.0

    def test_deviation_bound_monte_carlo(self):
        # all four cube values stay within 4 sqrt(2^m / N) of zero in at
        # least 99 of 100 replications when eta = 0
        p = constant_problem(0.0)
        full = p.full_cover()
        m, n = 2, 10_000
        radius = 4.0 * math.sqrt(2.0 ** m / n)
        coords = full.refined_coords(m)
        good = 0
        for r in range(100):
            s = draw_sample(p, full, n, RNG(100 + r), RNG(200 + r))
            fit = fit_histogram(s, m, full, p)
            if np.all(np.abs(fit.values_at_cubes(coords)) <= radius):
                good += 1
        assert good >= 99

    def test_unbiasedness_against_projection(self):
        # Monte Carlo mean of the weighted fit matches the marginal-weighted
        # cube averages within 3 standard errors
        p = builtin_problems()["ramp1d"]
        full = p.full_cover()
        m, n, reps = 3, 4096, 10_000
        proj = l2_projection(p, m, m + 6)
        coords = full.refined_coords(m)
        target = proj.values_at_cubes(coords)
        acc = np.zeros(len(coords))
        acc2 = np.zeros(len(coords))
        for r in range(reps):
            s = draw_sample(p, full, n, RNG(5000 + r), RNG(9000 + r))
            vals = fit_histogram(s, m, full, p).values_at_cubes(coords)
            acc += vals
            acc2 += vals ** 2
        mean = acc / reps
        se = np.sqrt((acc2 / reps - mean ** 2) / reps)
        assert np.all(np.abs(mean - target) <= 3 * se + 1e-12)


class TestEmpiricalMeanFit:
    def test_cube_mean(self):
        s = _sample([[0.1], [0.2]], [1, -1])
        fit = empirical_mean_fit(s, 1)
        assert fit((np.array([0.1]))) == 0.0

    def test_empty_cube_is_zero(self):
        s = _sample([[0.9]], [1])
        fit = empirical_mean_fit(s, 1)
        assert fit((np.array([0.2]))) == 0.0
        assert fit((np.array([0.9]))) == 1.0

    def test_minimizes_empirical_risk(self):
        # the per-cube mean beats random elements of the class
        rng = RNG(77)
        for trial in range(20):
            n = int(rng.integers(8, 40))
            m = int(rng.integers(0, 3))
            s = _sample(rng.random((n, 1)), rng.choice([-1, 1], n))
            fit = empirical_mean_fit(s, m)
            base = empirical_risk(fit, s)
            for _ in range(100):
                cand = PiecewiseConstantFn(m, 1, {
                    (i,): float(v) for i, v in enumerate(
                        rng.uniform(-1, 1, 1 << m))})
                assert base <= empirical_risk(cand, s) + 1e-12


class TestEmpiricalRisk:
    def test_zero_predictor(self):
        s = _sample([[0.1], [0.9]], [1, -1])
        assert empirical_risk(PiecewiseConstantFn.constant(1, 0.0), s) == 1.0

    def test_perfect_predictor(self):
        s = _sample([[0.1], [0.9]], [1, 1])
        assert empirical_risk(PiecewiseConstantFn.constant(1, 1.0), s) == 0.0

    def test_half_wrong(self):
        s = _sample([[0.1], [0.9]], [1, -1])
        assert empirical_risk(PiecewiseConstantFn.constant(1, 1.0), s) == 2.0


class TestProjection:
    def test_constant_eta(self):
        p = constant_problem(0.7)
        proj = l2_projection(p, 2)
        assert np.allclose(list(proj.coeffs.values()), 0.7)

    def test_ramp_midpoints(self):
        p = builtin_problems()["ramp1d"]
        proj = l2_projection(p, 1)
        assert proj.coeffs[(0,)] == pytest.approx(-0.5, abs=1e-12)
        assert proj.coeffs[(1,)] == pytest.approx(0.5, abs=1e-12)

    def test_requires_margin(self):
        p = builtin_problems()["ramp1d"]
        with pytest.raises(ValueError):
            l2_projection(p, 4, 6)

    def test_minimax_projection_is_optimal(self):
        # perturbing any coefficients increases the weighted squared error
        from activeband.minimax import make_bump_params, make_minimax_problem

        p = make_minimax_problem(make_bump_params(q=8, m_cells=3))
        m = 3
        proj = l2_projection(p, m, m + 7)
        pts, masses = p.marginal.quadrature(m + 7)
        eta = p.eta(pts)
        base = float(masses @ (eta - proj(pts)) ** 2)
        rng = RNG(8)
        keys = sorted(set(map(tuple, p.marginal.support_cover.ancestor_coords(m).tolist())))
        for _ in range(200):
            coeffs = dict(proj.coeffs)
            for key in keys:
                coeffs[key] = float(np.clip(
                    coeffs.get(key, 0.0) + rng.uniform(-0.2, 0.2), -1, 1))
            cand = PiecewiseConstantFn(m, 1, coeffs)
            assert base <= float(masses @ (eta - cand(pts)) ** 2) + 1e-12

    def test_residual_orthogonality(self):
        # the projection residual integrates to zero against every cube
        # indicator
        for name in ("tent1d", "convex1d"):
            p = builtin_problems()[name]
            m = 3
            proj = l2_projection(p, m, m + 8)
            pts, masses = p.marginal.quadrature(m + 8)
            resid = p.eta(pts) - proj(pts)
            from activeband.dyadic import cube_coords, ravel_coords

            flat = ravel_coords(cube_coords(pts, m), m)
            sums = np.bincount(flat, weights=masses * resid, minlength=1 << m)
            assert np.all(np.abs(sums) <= 1e-6)


class TestDimensionBound:
    def test_restricted_dimension_bound(self):
        # cube count of any cover is at most 2^(dm) Pi(A) / u1
        for name in ("ramp1d", "minimax"):
            p = builtin_problems()[name]
            rng = RNG(13)
            u1 = p.regularity[0]
            for _ in range(20):
                lvl = int(rng.integers(1, 6))
                support = p.support_cover().ancestor_coords(min(lvl, p.marginal.level))
                take = rng.random(len(support)) < 0.5
                if not take.any():
                    continue
                cover = DyadicCover.from_coords(min(lvl, p.marginal.level), 1,
                                                support[take])
                for m in range(cover.level, cover.level + 3):
                    dim = restricted_dimension(cover, m)
                    bound = 2.0 ** (p.dim * m) * pi_measure(p, cover) / u1
                    assert dim <= bound + 1e-9


class TestBernstein:
    def test_decays_fast_for_large_t(self):
        assert bernstein_deviation(2, 1, 1.0, 10_000, 100.0, 1.0) < 1e-10

    def test_monotone_in_t(self):
        vals = [bernstein_deviation(3, 1, 1.0, 4096, t, 1.0)
                for t in np.linspace(0.5, 30, 40)]
        assert np.all(np.diff(vals) <= 1e-15)

    def test_threshold_formula(self):
        assert bernstein_threshold(3, 1, 1.0, 4096, 2.0, 1.0) == pytest.approx(
            2.0 * math.sqrt(8.0 / 4096.0))

    def test_coverage_smoke(self):
        # small version of the full coverage check: deviations exceed the
        # threshold rarely
        p = builtin_problems()["ramp1d"]
        full = p.full_cover()
        m, n = 3, 4096
        t = 2.0 * math.log(n)
        thr = bernstein_threshold(m, 1, 1.0, n, t, 1.0)
        proj = l2_projection(p, m, m + 6)
        coords = full.refined_coords(m)
        exceed = 0
        for r in range(30):
            s = draw_sample(p, full, n, RNG(300 + r), RNG(400 + r))
            fit = fit_histogram(s, m, full, p)
            dev = np.max(np.abs(fit.values_at_cubes(coords)
                                - proj.values_at_cubes(coords)))
            exceed += dev > thr
        assert exceed <= 2

    def test_rejects_nonpositive_t(self):
        with pytest.raises(ValueError):
            bernstein_deviation(2, 1, 1.0, 100, 0.0, 1.0)
