"""Histogram regression estimators on dyadic partitions.

Two per-cube fits coexist on purpose: the known-marginal weighted estimator
(used for the plug-in classifier, exactly unbiased for the projection before
clamping) and the plain per-cube empirical mean (the minimizer of the
empirical squared loss, used inside model selection).
"""

from __future__ import annotations

import math

import numpy as np

from .dyadic import DyadicCover, PiecewiseConstantFn, cube_coords, ravel_coords
from .problems import LabeledSample, Problem, pi_measure

__all__ = [
    "fit_histogram",
    "empirical_mean_fit",
    "empirical_risk",
    "l2_projection",
    "bernstein_threshold",
    "bernstein_deviation",
    "restricted_dimension",
]

DEFAULT_QUAD_MARGIN = 6


def _cells_of_cover(a: DyadicCover, p: Problem, level: int):
    """Level-``level`` cube coordinates meeting ``a`` and the masses of the
    intersections, handling covers coarser or finer than ``level``."""
    if level >= a.level:
        coords = a.refined_coords(level)
        masses = p.marginal.cube_masses(level, coords)
    else:
        anc = a.coords_array >> (a.level - level)
        child_mass = p.marginal.cube_masses(a.level, a.coords_array)
        flat = ravel_coords(anc, level)
        uniq, inv = np.unique(flat, return_inverse=True)
        masses = np.zeros(len(uniq))
        np.add.at(masses, inv, child_mass)
        n = 1 << level
        coords = np.empty((len(uniq), a.dim), dtype=np.int64)
        rem = uniq.copy()
        for j in range(a.dim - 1, -1, -1):
            coords[:, j] = rem % n
            rem //= n
    return coords, masses


def fit_histogram(sample: LabeledSample, m: int, a: DyadicCover, p: Problem,
                  clamp: bool = True) -> PiecewiseConstantFn:
    """Known-marginal histogram estimator on the cover ``a``.

    On each level-``m`` cube meeting ``a`` the value is
    sum_j Y_j 1{X_j in cube} / (N * Pi(cube and a) / Pi(a)), with exact
    oracle masses; the value is clamped into [-1, 1] (the raw formula can
    leave the range on small samples) and is 0 off ``a``.
    """
    if a.n_cubes == 0:
        raise ValueError("empty cover")
    mass_a = pi_measure(p, a)
    if mass_a <= 0.0:
        raise ValueError("cover has zero marginal mass")
    coords, masses = _cells_of_cover(a, p, m)
    flat_cells = ravel_coords(coords, m)

    n = len(sample)
    values = np.zeros(len(flat_cells))
    if n > 0:
        flat_pts = ravel_coords(cube_coords(sample.xs, m), m)
        pos = np.searchsorted(flat_cells, flat_pts)
        pos = np.minimum(pos, len(flat_cells) - 1)
        inside = flat_cells[pos] == flat_pts
        sums = np.zeros(len(flat_cells))
        np.add.at(sums, pos[inside], sample.ys[inside].astype(float))
        cond = masses / mass_a
        np.divide(sums, n * cond, out=values, where=cond > 0)
    if clamp:
        values = np.clip(values, -1.0, 1.0)
    coeffs = {
        tuple(int(v) for v in coords[i]): float(values[i])
        for i in range(len(values)) if values[i] != 0.0
    }
    return PiecewiseConstantFn(m, a.dim, coeffs)


def empirical_mean_fit(sample: LabeledSample, m: int,
                       a: DyadicCover | None = None) -> PiecewiseConstantFn:
    """Per-cube empirical mean of the labels; empty cubes get 0.

    This is the minimizer of the empirical squared loss over the unit ball of
    level-``m`` histograms.  The cover argument is accepted for interface
    symmetry; samples are assumed to live on the region of interest.
    """
    dim = sample.xs.shape[1]
    if len(sample) == 0:
        return PiecewiseConstantFn(m, dim, {})
    flat = ravel_coords(cube_coords(sample.xs, m), m)
    uniq, inv = np.unique(flat, return_inverse=True)
    sums = np.bincount(inv, weights=sample.ys.astype(float), minlength=len(uniq))
    counts = np.bincount(inv, minlength=len(uniq))
    means = np.clip(sums / counts, -1.0, 1.0)
    n = 1 << m
    coords = np.empty((len(uniq), dim), dtype=np.int64)
    rem = uniq.copy()
    for j in range(dim - 1, -1, -1):
        coords[:, j] = rem % n
        rem //= n
    coeffs = {
        tuple(int(v) for v in coords[i]): float(means[i])
        for i in range(len(uniq)) if means[i] != 0.0
    }
    return PiecewiseConstantFn(m, dim, coeffs)


def empirical_risk(f: PiecewiseConstantFn, sample: LabeledSample) -> float:
    """Mean squared loss of ``f`` on the sample."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    return float(np.mean((sample.ys - f(sample.xs)) ** 2))


def l2_projection(p: Problem, m: int, quad_level: int | None = None) -> PiecewiseConstantFn:
    """Marginal-weighted per-cube average of eta by midpoint quadrature.

    Exact for eta linear on cubes; in general the error is
    O(2^(-2(quad_level - m))) per the midpoint rule.  Cubes with zero mass
    get coefficient 0.
    """
    if quad_level is None:
        quad_level = m + DEFAULT_QUAD_MARGIN
    if quad_level < m + 4:
        raise ValueError("quad_level must be at least m + 4")
    quad_level = max(quad_level, p.marginal.level)
    pts, masses = p.marginal.quadrature(quad_level)
    vals = p.eta(pts)
    anc = cube_coords(pts, m)
    flat = ravel_coords(anc, m)
    uniq, inv = np.unique(flat, return_inverse=True)
    tot = np.bincount(inv, weights=masses, minlength=len(uniq))
    acc = np.bincount(inv, weights=masses * vals, minlength=len(uniq))
    means = np.zeros(len(uniq))
    np.divide(acc, tot, out=means, where=tot > 0)
    means = np.clip(means, -1.0, 1.0)
    n = 1 << m
    coords = np.empty((len(uniq), p.dim), dtype=np.int64)
    rem = uniq.copy()
    for j in range(p.dim - 1, -1, -1):
        coords[:, j] = rem % n
        rem //= n
    coeffs = {
        tuple(int(v) for v in coords[i]): float(means[i])
        for i in range(len(uniq)) if means[i] != 0.0
    }
    return PiecewiseConstantFn(m, p.dim, coeffs)


def restricted_dimension(a: DyadicCover, m: int) -> int:
    """Number of level-``m`` cubes meeting the cover."""
    if m >= a.level:
        return a.n_cubes * (1 << (a.dim * (m - a.level)))
    return len(a.ancestor_coords(m))


def bernstein_threshold(m: int, d: int, a_mass: float, n: int, t: float, u1: float) -> float:
    """The sup-norm deviation level t * sqrt(2^(dm) Pi(A) / (u1 N))."""
    return t * math.sqrt(2.0 ** (d * m) * a_mass / (u1 * n))


def bernstein_deviation(m: int, d: int, a_mass: float, n: int, t: float, u1: float,
                        n_cubes: int | None = None) -> float:
    """Bernstein tail bound for the sup deviation of the weighted histogram.

    Evaluates 2 d_m exp(-t^2 / (2 (1 + (t/3) sqrt(2^(dm) Pi(A) / (u1 N)))))
    where d_m is the number of cubes meeting the cover (worst-cased from the
    regularity bound when not supplied).  The value may exceed 1 for small t.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if n_cubes is None:
        n_cubes = int(min(2.0 ** (d * m), math.ceil(2.0 ** (d * m) * a_mass / u1)))
        n_cubes = max(n_cubes, 1)
    scale = math.sqrt(2.0 ** (d * m) * a_mass / (u1 * n))
    return 2.0 * n_cubes * math.exp(-t * t / (2.0 * (1.0 + t / 3.0 * scale)))
