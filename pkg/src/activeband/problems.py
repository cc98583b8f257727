"""Synthetic classification problems with exactly computable marginals.

Every problem exposes the regression function eta(x) = E[Y | X = x] in closed
form, together with a marginal that is a piecewise-constant density on some
dyadic partition.  That makes measures of dyadic covers, conditional sampling
and quadrature all exact, so statistical certificates carry no hidden
discretization bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .dyadic import DyadicCover, cube_coords, ravel_coords

__all__ = [
    "MarginalSpec",
    "Problem",
    "LabeledSample",
    "uniform_marginal",
    "piecewise_marginal",
    "pi_measure",
    "sample_x",
    "sample_y",
    "draw_sample",
    "builtin_problems",
    "constant_problem",
    "PROBLEM_NAMES",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MarginalSpec:
    """A probability density that is constant on level-``level`` dyadic cubes.

    ``densities`` maps cube coordinates to the (positive) density value there;
    absent cubes carry density 0.  The support is therefore a dyadic cover and
    all cube masses are exact.

    kind is one of 'uniform', 'dyadic-piecewise-density', 'minimax-annulus';
    the sampling and measure machinery is shared.
    """

    kind: str
    dim: int
    level: int
    densities: dict[tuple[int, ...], float]

    def __post_init__(self):
        n = 1 << self.level
        total = 0.0
        for key, rho in self.densities.items():
            if len(key) != self.dim or any(not (0 <= c < n) for c in key):
                raise ValueError(f"bad density key {key}")
            if rho <= 0:
                raise ValueError("density table must list positive values only")
            total += rho
        total *= 2.0 ** (-self.dim * self.level)
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"total mass {total} != 1")

    @cached_property
    def _dens_dense(self) -> np.ndarray:
        table = np.zeros((1 << self.level) ** self.dim)
        keys = np.asarray(list(self.densities.keys()), dtype=np.int64).reshape(-1, self.dim)
        vals = np.asarray(list(self.densities.values()), dtype=float)
        table[ravel_coords(keys, self.level)] = vals
        return table

    @cached_property
    def _mass_tables(self) -> dict[int, np.ndarray]:
        """Dense per-cube mass arrays for every level <= table level."""
        tables = {self.level: self._dens_dense * 2.0 ** (-self.dim * self.level)}
        for lvl in range(self.level - 1, -1, -1):
            side = 1 << (lvl + 1)
            arr = tables[lvl + 1].reshape((side,) * self.dim)
            # pool the 2^dim children onto each parent cube, axis by axis
            for axis in range(self.dim):
                arr = arr.reshape(
                    arr.shape[:axis] + (arr.shape[axis] // 2, 2) + arr.shape[axis + 1:]
                ).sum(axis=axis + 1)
            tables[lvl] = arr.reshape(-1)
        return tables

    def density_at_cubes(self, coords: np.ndarray) -> np.ndarray:
        """Density value on level-``level`` cubes given integer coordinates."""
        return self._dens_dense[ravel_coords(coords, self.level)]

    def cube_masses(self, level: int, coords: np.ndarray) -> np.ndarray:
        """Exact masses of arbitrary dyadic cubes given by integer coordinates."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.dim)
        if level <= self.level:
            return self._mass_tables[level][ravel_coords(coords, level)]
        anc = coords >> (level - self.level)
        return self.density_at_cubes(anc) * 2.0 ** (-self.dim * level)

    def measure(self, cover: DyadicCover) -> float:
        if cover.n_cubes == 0:
            return 0.0
        return float(self.cube_masses(cover.level, cover.coords_array).sum())

    @cached_property
    def support_cover(self) -> DyadicCover:
        keys = np.asarray(sorted(self.densities.keys()), dtype=np.int64).reshape(-1, self.dim)
        return DyadicCover.from_coords(self.level, self.dim, keys)

    def density_bounds(self) -> tuple[float, float]:
        vals = list(self.densities.values())
        return min(vals), max(vals)

    def regularity_bounds(self, max_level: int = 10) -> tuple[float, float]:
        """(u1, u2) such that every positive-mass cube at levels 1..max_level
        has mass in [u1, u2] * 2^(-dm).  Levels beyond the table level repeat
        the density range, so the scan is exact for all levels at once."""
        lo, hi = self.density_bounds()
        for lvl in range(1, min(max_level, self.level) + 1):
            masses = self._mass_tables[lvl]
            pos = masses[masses > 0.0]
            ratios = pos * 2.0 ** (self.dim * lvl)
            lo = min(lo, float(ratios.min()))
            hi = max(hi, float(ratios.max()))
        return lo, hi

    def quadrature(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint nodes and exact masses on the support, refined to ``level``."""
        if level < self.level:
            raise ValueError("quadrature level must be at least the table level")
        child = self.support_cover.refined_coords(level)
        pts = (child + 0.5) / (1 << level)
        masses = self.cube_masses(level, child)
        return pts, masses

    def sample_conditional(self, cover: DyadicCover, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n points from the marginal conditioned on ``cover``.

        Exact two-stage scheme: the cover is refined to the density-table
        level (within which the density is constant), a cube is chosen with
        probability proportional to its mass, then the point is uniform in
        the cube.  Draw order: cube lottery first, then one uniform block of
        shape (n, d) for the within-cube offsets.
        """
        lvl = max(cover.level, self.level)
        child = cover.refined_coords(lvl)
        masses = self.cube_masses(lvl, child)
        total = masses.sum()
        if cover.n_cubes == 0 or total <= 0.0:
            raise ValueError("empty conditional: cover has zero mass")
        probs = masses / total
        idx = rng.choice(len(child), size=n, p=probs)
        offs = rng.random((n, self.dim))
        return (child[idx] + offs) / (1 << lvl)


def uniform_marginal(dim: int) -> MarginalSpec:
    return MarginalSpec("uniform", dim, 0, {(0,) * dim: 1.0})


def piecewise_marginal(dim: int, level: int, densities: dict, kind: str = "dyadic-piecewise-density") -> MarginalSpec:
    return MarginalSpec(kind, dim, level, dict(densities))


class LabeledSample(NamedTuple):
    """A batch of labeled draws: xs has shape (n, d), ys in {-1, +1}^n."""

    xs: np.ndarray
    ys: np.ndarray

    def __len__(self) -> int:
        return len(self.ys)


@dataclass(frozen=True, eq=False)
class Problem:
    """Distribution oracle: exact eta, exact dyadic measures, exact samplers.

    eta must be vectorized: it maps an (n, d) array to an (n,) array with
    values in [-1, 1].  The recorded constants certify membership in the
    relevant nonparametric classes (see the catalog docstrings).
    """

    name: str
    dim: int
    beta: float
    gamma: float
    noise_B: float
    holder_B1: float
    assumption2_B2: float | None
    regularity: tuple[float, float]
    eta: Callable[[np.ndarray], np.ndarray]
    marginal: MarginalSpec
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ValueError("beta must lie in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        u1, u2 = self.regularity
        if not (0 < u1 <= u2):
            raise ValueError("need 0 < u1 <= u2")
        if self.dim != self.marginal.dim:
            raise ValueError("problem/marginal dimension mismatch")
        if "upper-bound-regime" in self.tags and self.beta * self.gamma > self.dim:
            raise ValueError("upper-bound regime requires beta * gamma <= d")
        # range check on a modest support grid; eta is analytic so this is a
        # guard against construction bugs, not a certification
        lvl = min(self.marginal.level + 2, 10 if self.dim == 1 else 6)
        pts, _ = self.marginal.quadrature(max(lvl, self.marginal.level))
        vals = self.eta(pts)
        if np.any(np.abs(vals) > 1.0 + 1e-9):
            raise ValueError("eta leaves [-1, 1] on the support")

    def eta_at(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            return float(self.eta(pts[None, :])[0])
        return self.eta(pts)

    def support_cover(self) -> DyadicCover:
        return self.marginal.support_cover

    def full_cover(self) -> DyadicCover:
        return DyadicCover.full(self.dim, 0)


def pi_measure(p: Problem, a: DyadicCover) -> float:
    """Exact marginal mass of a dyadic cover."""
    return p.marginal.measure(a)


def sample_x(p: Problem, a: DyadicCover, rng: np.random.Generator, size: int | None = None):
    """Draw from the marginal conditioned on ``a``; shape (d,) or (size, d)."""
    n = 1 if size is None else int(size)
    pts = p.marginal.sample_conditional(a, rng, n)
    return pts[0] if size is None else pts

def sample_y(p: Problem, x, rng: np.random.Generator):
    """Draw labels with P(Y = +1 | X = x) = (1 + eta(x)) / 2."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    probs = (1.0 + p.eta(pts)) / 2.0
    ys = np.where(rng.random(len(pts)) < probs, 1, -1).astype(np.int64)
    return int(ys[0]) if single else ys


def draw_sample(p: Problem, a: DyadicCover, n: int, rng_x: np.random.Generator,
                rng_y: np.random.Generator) -> LabeledSample:
    xs = sample_x(p, a, rng_x, size=n)
    ys = sample_y(p, xs, rng_y)
    return LabeledSample(xs, ys)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

PROBLEM_NAMES = ("ramp1d", "tent1d", "gradient2d", "convex1d", "offset1d", "minimax")


@lru_cache(maxsize=None)
def _ramp1d() -> Problem:
    # eta(x) = 2x - 1, uniform marginal.  Pi(|eta| <= t) = t, so gamma = 1,
    # B = 1; Lipschitz constant 2 gives B1 = 2.  Linear eta with uniform
    # marginal gives the per-cube ratio 1/3 in the sup-vs-L2 comparison,
    # hence B2 = 1/3 exactly.
    return Problem(
        name="ramp1d", dim=1, beta=1.0, gamma=1.0, noise_B=1.0, holder_B1=2.0,
        assumption2_B2=1.0 / 3.0, regularity=(1.0, 1.0),
        eta=lambda X: 2.0 * X[:, 0] - 1.0,
        marginal=uniform_marginal(1),
        tags=("upper-bound-regime", "gradient-bounded"),
    )


@lru_cache(maxsize=None)
def _tent1d() -> Problem:
    # eta(x) = 1 - 2|x - 1/2| >= 0; the decision boundary sits at the edge
    # points {0, 1}.  Pi(|eta| <= t) = t, gamma = 1, B = 1, B1 = 2.  Every
    # level m >= 1 cube is linear (the kink is dyadic), so the squared bias
    # is 4^-m / 3 in closed form and B2 = 1/3.
    return Problem(
        name="tent1d", dim=1, beta=1.0, gamma=1.0, noise_B=1.0, holder_B1=2.0,
        assumption2_B2=1.0 / 3.0, regularity=(1.0, 1.0),
        eta=lambda X: 1.0 - 2.0 * np.abs(X[:, 0] - 0.5),
        marginal=uniform_marginal(1),
        tags=("upper-bound-regime", "gradient-bounded"),
    )


@lru_cache(maxsize=None)
def _gradient2d() -> Problem:
    # eta(x, y) = (x + y - 1) / 2: differentiable with gradient (1/2, 1/2)
    # bounded away from zero everywhere.  Pi(|eta| <= t) = 4t(1 - t) <= 4t,
    # so gamma = 1, B = 4; |eta(a) - eta(b)| <= ||a - b||_inf gives B1 = 1.
    return Problem(
        name="gradient2d", dim=2, beta=1.0, gamma=1.0, noise_B=4.0, holder_B1=1.0,
        assumption2_B2=None, regularity=(1.0, 1.0),
        eta=lambda X: (X[:, 0] + X[:, 1] - 1.0) / 2.0,
        marginal=uniform_marginal(2),
        tags=("upper-bound-regime", "gradient-bounded"),
    )


@lru_cache(maxsize=None)
def _convex1d() -> Problem:
    # eta(x) = 4(x - 1/2)^2 - 1/2, convex, range [-1/2, 1/2], B1 = 4.
    # Pi(|eta| <= t) = sqrt(1/2 + t) - sqrt(1/2 - t) <= 2t (sup of the ratio
    # is 2, attained at t = 1/2), so gamma = 1, B = 2.
    return Problem(
        name="convex1d", dim=1, beta=1.0, gamma=1.0, noise_B=2.0, holder_B1=4.0,
        assumption2_B2=None, regularity=(1.0, 1.0),
        eta=lambda X: 4.0 * (X[:, 0] - 0.5) ** 2 - 0.5,
        marginal=uniform_marginal(1),
        tags=("upper-bound-regime", "convex-boundary"),
    )


@lru_cache(maxsize=None)
def _offset1d() -> Problem:
    # eta(x) = min(2(x - 1/3), 1): same constants as ramp1d (B = 1,
    # gamma = 1, B1 = 2) but the decision boundary sits at 1/3, whose
    # distance to the level-m dyadic grid is exactly 1/(3 2^m) at every
    # level.  ramp1d's boundary is a dyadic edge at every level and plug-in
    # classifiers are exactly Bayes there in almost every replication; this
    # variant exists so that excess-risk rates are measurable with moderate
    # replication counts.
    b = 1.0 / 3.0
    return Problem(
        name="offset1d", dim=1, beta=1.0, gamma=1.0, noise_B=1.0, holder_B1=2.0,
        assumption2_B2=None, regularity=(1.0, 1.0),
        eta=lambda X: np.minimum(2.0 * (X[:, 0] - b), 1.0),
        marginal=uniform_marginal(1),
        tags=("upper-bound-regime", "gradient-bounded"),
    )


@lru_cache(maxsize=None)
def _minimax() -> Problem:
    from .minimax import make_minimax_problem

    return make_minimax_problem()


def builtin_problems() -> dict[str, Problem]:
    """The catalog addressable from the CLI."""
    return {
        "ramp1d": _ramp1d(),
        "tent1d": _tent1d(),
        "gradient2d": _gradient2d(),
        "convex1d": _convex1d(),
        "offset1d": _offset1d(),
        "minimax": _minimax(),
    }


def get_problem(name: str) -> Problem:
    cat = builtin_problems()
    if name not in cat:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(cat)}")
    return cat[name]


def constant_problem(c: float, dim: int = 1) -> Problem:
    """Test helper: eta identically ``c`` with a uniform marginal.

    For c = 0 the low-noise condition fails at small thresholds; noise_B is
    then infinite and certificate checks skip such degenerate fixtures.
    """
    if abs(c) > 1.0:
        raise ValueError("constant eta must lie in [-1, 1]")
    noise_b = math.inf if c == 0.0 else max(1.0, 1.0 / abs(c))
    return Problem(
        name=f"const({c})", dim=dim, beta=1.0, gamma=1.0, noise_B=noise_b,
        holder_B1=0.0, assumption2_B2=None, regularity=(1.0, 1.0),
        eta=lambda X, c=c: np.full(len(X), float(c)),
        marginal=uniform_marginal(dim),
        tags=("degenerate",) if c == 0.0 else (),
    )
