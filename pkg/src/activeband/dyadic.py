"""Dyadic geometry of the unit cube.

Cubes are half-open boxes ``prod_i [c_i 2^-m, (c_i+1) 2^-m)`` whose outermost
faces (``c_i = 2^m - 1``) are closed, so the ``2^(dm)`` cubes at one level tile
``[0,1]^d`` exactly and point evaluation is total.  All types are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

__all__ = [
    "CubeIndex",
    "DyadicCover",
    "PiecewiseConstantFn",
    "ConfidenceBand",
    "cube_coords",
    "cube_of_point",
    "refine",
    "sign_crossing_set",
    "sign_pm",
]

# Largest dense lookup table we are willing to allocate (2^26 floats = 512 MB
# would be too much; callers stay far below this).
_MAX_DENSE = 1 << 24


def sign_pm(v):
    """Sign with the convention sign(0) = +1.

    Works on scalars and arrays; returns int for scalar input.
    """
    arr = np.asarray(v)
    out = np.where(arr >= 0.0, 1, -1)
    if arr.ndim == 0:
        return int(out)
    return out


def cube_coords(x, level: int) -> np.ndarray:
    """Integer cube coordinates at ``level`` for points in [0,1]^d.

    Accepts a single point of shape (d,) or a batch of shape (n, d); the
    result has the same leading shape.  Coordinates exactly 1.0 map to the
    last cube (closed outer face).
    """
    pts = np.asarray(x, dtype=float)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("coordinate outside [0,1]")
    n = 1 << level
    c = np.floor(pts * n).astype(np.int64)
    return np.minimum(c, n - 1)


def ravel_coords(coords: np.ndarray, level: int) -> np.ndarray:
    """Row-major flat index of integer cube coordinates (lexicographic order)."""
    c = np.asarray(coords, dtype=np.int64)
    n = 1 << level
    flat = c[..., 0].copy()
    for j in range(1, c.shape[-1]):
        flat = flat * n + c[..., j]
    return flat


@dataclass(frozen=True)
class CubeIndex:
    """One dyadic cube: resolution level plus integer corner coordinates."""

    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        n = 1 << self.level
        if len(self.coords) == 0:
            raise ValueError("empty coords")
        if any(not (0 <= c < n) for c in self.coords):
            raise ValueError(f"coords {self.coords} out of range at level {self.level}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def lower(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float) / (1 << self.level)

    def upper(self) -> np.ndarray:
        return (np.asarray(self.coords, dtype=float) + 1.0) / (1 << self.level)

    def center(self) -> np.ndarray:
        return (np.asarray(self.coords, dtype=float) + 0.5) / (1 << self.level)

    def volume(self) -> float:
        return float(2.0 ** (-self.dim * self.level))

    def contains(self, x) -> bool:
        c = cube_coords(np.asarray(x, dtype=float), self.level)
        return tuple(int(v) for v in c) == self.coords


def cube_of_point(x, level: int) -> CubeIndex:
    """The unique cube containing ``x`` under the half-open convention."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1)
    if pts.ndim != 1:
        raise ValueError("cube_of_point expects a single point")
    c = cube_coords(pts, level)
    return CubeIndex(level, tuple(int(v) for v in c))


def _child_offsets(dim: int, shift: int) -> np.ndarray:
    """All (2^shift)^dim child offsets, lexicographically sorted."""
    side = 1 << shift
    axes = [np.arange(side, dtype=np.int64)] * dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return grid.reshape(-1, dim)


@dataclass(frozen=True)
class DyadicCover:
    """A duplicate-free union of dyadic cubes at a single level.

    ``cubes`` are sorted lexicographically by coordinates.  The empty cover is
    allowed (``dim`` keeps the ambient dimension known).
    """

    level: int
    dim: int
    cubes: tuple[CubeIndex, ...]

    def __post_init__(self):
        prev = None
        for c in self.cubes:
            if c.level != self.level:
                raise ValueError("cube level mismatch in cover")
            if c.dim != self.dim:
                raise ValueError("cube dimension mismatch in cover")
            if prev is not None and not (c.coords > prev):
                raise ValueError("cover cubes must be strictly sorted")
            prev = c.coords

    @classmethod
    def from_coords(cls, level: int, dim: int, coords) -> "DyadicCover":
        arr = np.asarray(coords, dtype=np.int64).reshape(-1, dim)
        if arr.shape[0]:
            arr = np.unique(arr, axis=0)
        cubes = tuple(CubeIndex(level, tuple(int(v) for v in row)) for row in arr)
        return cls(level, dim, cubes)

    @classmethod
    def full(cls, dim: int, level: int) -> "DyadicCover":
        return cls.from_coords(level, dim, _child_offsets(dim, level))

    @property
    def n_cubes(self) -> int:
        return len(self.cubes)

    @cached_property
    def coords_array(self) -> np.ndarray:
        if not self.cubes:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.asarray([c.coords for c in self.cubes], dtype=np.int64)

    @cached_property
    def flat_ids(self) -> np.ndarray:
        return ravel_coords(self.coords_array, self.level)

    def volume(self) -> float:
        return self.n_cubes * 2.0 ** (-self.dim * self.level)

    def contains_points(self, x) -> np.ndarray:
        """Boolean membership mask for points of shape (n, d)."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        flat = ravel_coords(cube_coords(pts, self.level), self.level)
        ids = self.flat_ids
        if ids.size == 0:
            return np.zeros(len(flat), dtype=bool)
        pos = np.searchsorted(ids, flat)
        pos = np.minimum(pos, ids.size - 1)
        return ids[pos] == flat

    def refined_coords(self, level: int) -> np.ndarray:
        """Coordinates of all child cubes at a finer level, sorted."""
        if level < self.level:
            raise ValueError("cannot refine to a coarser level")
        if level == self.level:
            return self.coords_array
        shift = level - self.level
        offs = _child_offsets(self.dim, shift)
        out = (self.coords_array[:, None, :] << shift) + offs[None, :, :]
        return out.reshape(-1, self.dim)

    def refine(self, level: int) -> "DyadicCover":
        return DyadicCover.from_coords(level, self.dim, self.refined_coords(level))

    def ancestor_coords(self, level: int) -> np.ndarray:
        """Distinct ancestor coordinates at a coarser (or equal) level."""
        if level > self.level:
            raise ValueError("ancestor level must not exceed cover level")
        anc = self.coords_array >> (self.level - level)
        if anc.shape[0]:
            anc = np.unique(anc, axis=0)
        return anc


@dataclass(frozen=True)
class PiecewiseConstantFn:
    """A piecewise-constant function on the level-``level`` dyadic partition.

    ``coeffs`` maps cube coordinate tuples to values in [-1, 1]; absent cubes
    evaluate to 0, so sparse functions on small active sets stay cheap.
    """

    level: int
    dim: int
    coeffs: Mapping[tuple[int, ...], float]

    def __post_init__(self):
        n = 1 << self.level
        for key, val in self.coeffs.items():
            if len(key) != self.dim or any(not (0 <= c < n) for c in key):
                raise ValueError(f"bad coefficient key {key}")
            if abs(val) > 1.0 + 1e-9:
                raise ValueError(f"coefficient {val} outside [-1, 1]")

    @classmethod
    def constant(cls, dim: int, value: float, level: int = 0) -> "PiecewiseConstantFn":
        keys = _child_offsets(dim, level)
        return cls(level, dim, {tuple(int(v) for v in k): float(value) for k in keys})

    def coefficient(self, cube: CubeIndex) -> float:
        if cube.level != self.level:
            raise ValueError("cube level mismatch")
        return float(self.coeffs.get(cube.coords, 0.0))

    @cached_property
    def _dense(self) -> np.ndarray:
        size = (1 << self.level) ** self.dim
        if size > _MAX_DENSE:
            raise ValueError("function too fine for dense evaluation table")
        table = np.zeros(size)
        if self.coeffs:
            keys = np.asarray(list(self.coeffs.keys()), dtype=np.int64)
            vals = np.asarray(list(self.coeffs.values()), dtype=float)
            table[ravel_coords(keys, self.level)] = vals
        return table

    def values_at_cubes(self, coords: np.ndarray) -> np.ndarray:
        """Values on level-``level`` cubes given their integer coordinates."""
        return self._dense[ravel_coords(coords, self.level)]

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = self._dense[ravel_coords(cube_coords(pts, self.level), self.level)]
        return float(out[0]) if single else out


def refine(f: PiecewiseConstantFn, level: int) -> PiecewiseConstantFn:
    """Represent ``f`` on a finer partition; pointwise values are unchanged."""
    if level < f.level:
        raise ValueError(f"cannot refine level {f.level} to coarser {level}")
    if level == f.level:
        return f
    shift = level - f.level
    offs = _child_offsets(f.dim, shift)
    coeffs: dict[tuple[int, ...], float] = {}
    for key, val in f.coeffs.items():
        base = np.asarray(key, dtype=np.int64) << shift
        for off in offs:
            coeffs[tuple(int(v) for v in base + off)] = val
    return PiecewiseConstantFn(level, f.dim, coeffs)


@dataclass(frozen=True)
class ConfidenceBand:
    """A sup-norm band around a piecewise-constant estimate.

    On ``domain`` the band is [center - half_width, center + half_width]; off
    ``domain`` it degenerates to the single frozen function ``outside``.
    """

    center: PiecewiseConstantFn
    half_width: float
    domain: DyadicCover
    outside: PiecewiseConstantFn

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be nonnegative")
        if self.domain.level > self.center.level:
            raise ValueError("domain must be refinable to the center's level")
        if not (self.center.dim == self.domain.dim == self.outside.dim):
            raise ValueError("dimension mismatch in band")

    def lower(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        inside = self.domain.contains_points(pts)
        return np.where(inside, self.center(pts) - self.half_width, self.outside(pts))

    def upper(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        inside = self.domain.contains_points(pts)
        return np.where(inside, self.center(pts) + self.half_width, self.outside(pts))


def sign_crossing_set(band: ConfidenceBand, out_level: int) -> DyadicCover:
    """Cubes of ``band.domain`` (at ``out_level``) where the band straddles zero.

    A cube is included when sign(center - delta) != sign(center + delta) under
    sign(0) = +1, i.e. when the center value lies in [-delta, delta).  Points
    off the domain are never included: the band there is a single function.
    """
    if out_level < band.center.level:
        raise ValueError("out_level must be at least the center's level")
    child = band.domain.refined_coords(out_level)
    if child.shape[0] == 0:
        return DyadicCover(out_level, band.domain.dim, ())
    centers = (child + 0.5) / (1 << out_level)
    c = band.center(centers)
    crossing = sign_pm(c - band.half_width) != sign_pm(c + band.half_width)
    return DyadicCover.from_coords(out_level, band.domain.dim, child[crossing])
