"""Executable lower-bound benchmark family.

Builds the hypercube of regression functions made of small radial bumps over
an ordered block of grid cells, the annulus-shaped marginal that puts mass
exactly ``q^-d`` on each active cell, Gilbert-Varshamov sign codes, and the
per-sample KL and separation quantities that make the construction checkable
at desk scale.

Geometry notes that the code relies on:

* with ``q = 2^l`` the grid cells are the level-``l`` dyadic cubes and the
  sup-norm annuli around cell centers have corners on the level ``l + r1``
  dyadic lattice, so the whole marginal is an exact dyadic density table;
* the bump profile ``u`` is 1 on ``[0, 2^-v]``, 0 beyond ``1/2`` and smooth in
  between, so every bump vanishes on its cell boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .dyadic import DyadicCover, cube_coords, ravel_coords
from .problems import MarginalSpec, Problem, piecewise_marginal

__all__ = [
    "BumpParams",
    "SigmaHypothesis",
    "SupportGeometry",
    "make_bump_params",
    "build_geometry",
    "bump_u",
    "bump_phi",
    "eta_sigma",
    "marginal_density_p",
    "make_density_table",
    "gilbert_varshamov",
    "kl_per_sample",
    "separation",
    "holder_constant",
    "radius_sandwich",
    "make_minimax_problem",
    "alternating_sigma",
]

# Default number of perturbed cells is C2 * q^(d - beta*gamma); C2 is a free
# knob of the construction and 8 is the smallest value compatible with the
# Gilbert-Varshamov routine at the desk-scale default (d=1, q=16, beta=gamma=1).
DEFAULT_C2 = 8.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_U_SUBDIVISIONS = 1 << 15


def _bump_integrand(t: np.ndarray, v: int) -> np.ndarray:
    lo = 2.0 ** (-v)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > lo) & (t < 0.5)
    g = (0.5 - t[inside]) * (t[inside] - lo)
    out[inside] = np.exp(-1.0 / g)
    return out


@lru_cache(maxsize=None)
def _u_table(v: int) -> tuple[np.ndarray, np.ndarray]:
    """Edges and right-tail integrals of the bump integrand on [2^-v, 1/2].

    Composite 8-point Gauss-Legendre on 2^15 subintervals; the integrand is
    smooth and flat at both endpoints, so the table is accurate to roughly
    1e-10 relative (cross-checked against adaptive quadrature in the tests).
    """
    if v < 1:
        raise ValueError("v must be a positive integer")
    lo = 2.0 ** (-v)
    edges = np.linspace(lo, 0.5, _U_SUBDIVISIONS + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    pieces = half * (_bump_integrand(nodes.ravel(), v).reshape(nodes.shape) @ _GL_WEIGHTS)
    tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    return edges, tail


def bump_u(x, v: int):
    """The normalized right-tail bump profile.

    Equals 1 for x <= 2^-v, 0 for x >= 1/2, and decreases smoothly in
    between; the normalizing denominator is cached per ``v``.
    """
    edges, tail = _u_table(v)
    arr = np.asarray(x, dtype=float)
    out = np.interp(arr, edges, tail) / tail[0]
    return float(out) if arr.ndim == 0 else out


def _radial_quotient(radii: np.ndarray, values: np.ndarray, beta: float) -> float:
    """Max Hoelder quotient of a radial profile, adjacent plus coarse pairs."""
    dr = np.diff(radii)
    dv = np.abs(np.diff(values))
    keep = dr > 0
    best = float(np.max(dv[keep] / dr[keep] ** beta)) if keep.any() else 0.0
    step = max(1, len(radii) // 1024)
    r, u = radii[::step], values[::step]
    dd = np.abs(r[:, None] - r[None, :])
    du = np.abs(u[:, None] - u[None, :])
    mask = dd > 0
    best = max(best, float(np.max(du[mask] / dd[mask] ** beta)))
    return best


@lru_cache(maxsize=None)
def _u_holder_quotient(v: int, beta: float, dim: int) -> float:
    """Sup-norm Hoelder quotient of x -> u(||x||_2) over R^d.

    For radial functions the worst pairs are diagonal, which contributes the
    d^(beta/2) factor; the radial sup is measured on a dense grid.
    """
    radii = np.linspace(0.0, 0.75, (1 << 14) + 1)
    vals = bump_u(radii, v)
    return dim ** (beta / 2.0) * _radial_quotient(radii, vals, beta)


@dataclass(frozen=True, eq=False)
class BumpParams:
    """Parameters of the construction; build through make_bump_params."""

    dim: int
    q: int
    m_cells: int
    v: int
    r1: int
    r2: int
    beta: float
    gamma: float
    holder_L: float
    holder_C: float

    @property
    def level(self) -> int:
        return self.q.bit_length() - 1

    @property
    def table_level(self) -> int:
        return self.level + self.r1

    @property
    def annulus_density(self) -> float:
        d, r1, r2 = self.dim, self.r1, self.r2
        return 2.0 ** (d * (r1 - 1)) / (2.0 ** (d * (r1 - r2)) - 1.0)


def make_bump_params(dim: int = 1, q: int = 16, beta: float = 1.0, gamma: float = 1.0,
                     m_cells: int | None = None, v: int = 4, r1: int = 3, r2: int = 2,
                     holder_L: float | None = None, c2: float = DEFAULT_C2) -> BumpParams:
    """Validate and assemble construction parameters.

    The radii must satisfy 2^-v < 2^-r1 and 2^-r2 * sqrt(d) < 1/2 so every
    annulus sits strictly inside its cell and inside the bump support (for
    d = 1 the chain collapses since sqrt(d) = 1).  When ``holder_L`` is not
    given it is set to the measured Hoelder quotient of u(||.||_2), which
    makes the normalizer C equal to 1 and keeps the regression function
    inside [-1, 1] without clipping at desk scale.
    """
    if q < 2 or q & (q - 1):
        raise ValueError("q must be a power of 2, at least 2")
    if dim < 1:
        raise ValueError("dim must be positive")
    if not (0.0 < beta <= 1.0) or gamma <= 0.0:
        raise ValueError("need beta in (0,1] and gamma > 0")
    if beta * gamma > dim:
        raise ValueError("construction requires beta * gamma <= d")
    if not (isinstance(v, int) and isinstance(r1, int) and isinstance(r2, int)):
        raise ValueError("v, r1, r2 must be integers")
    if not (v > r1 > r2 >= 1):
        raise ValueError("need v > r1 > r2 >= 1")
    if 2.0 ** (-r2) * math.sqrt(dim) >= 0.5:
        raise ValueError("outer annulus radius must satisfy 2^-r2 sqrt(d) < 1/2")
    if m_cells is None:
        m_cells = int(math.floor(c2 * q ** (dim - beta * gamma)))
    if not (1 <= m_cells <= q ** dim):
        raise ValueError(f"m_cells {m_cells} outside [1, q^d]")
    quot = _u_holder_quotient(v, beta, dim)
    if holder_L is None:
        holder_L = quot
    holder_C = holder_L / quot
    return BumpParams(dim, q, m_cells, v, r1, r2, beta, gamma, holder_L, holder_C)


@dataclass(frozen=True)
class SigmaHypothesis:
    """One vertex of the sign hypercube."""

    sigma: tuple[int, ...]

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.sigma):
            raise ValueError("sigma entries must be +-1")

    @cached_property
    def arr(self) -> np.ndarray:
        return np.asarray(self.sigma, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.sigma)


def alternating_sigma(m_cells: int) -> SigmaHypothesis:
    return SigmaHypothesis(tuple(1 if i % 2 == 0 else -1 for i in range(m_cells)))


@dataclass(frozen=True, eq=False)
class SupportGeometry:
    """Cell ordering and outer-region geometry for one parameter bundle."""

    params: BumpParams
    ordered_cells: np.ndarray   # (q^d, d) int coords sorted by (||center||_2, lex)
    rank_of_cell: np.ndarray    # dense flat-cell-id -> rank
    r_S: float                  # circumscribed radius of the first m_cells cells
    r_inscribed: float          # largest r with B_+(0, r) inside the closed block
    a0_cells: np.ndarray        # (k, d) int coords of outer-region cells
    a0_mask: np.ndarray         # dense flat-cell-id -> bool
    c0: float                   # outer-region density

    @property
    def s_cells(self) -> np.ndarray:
        return self.ordered_cells[: self.params.m_cells]

    def cell_centers(self, coords: np.ndarray) -> np.ndarray:
        return (np.asarray(coords, dtype=float) + 0.5) / self.params.q


def build_geometry(params: BumpParams) -> SupportGeometry:
    d, q, m = params.dim, params.q, params.m_cells
    lvl = params.level
    axes = [np.arange(q, dtype=np.int64)] * d
    cells = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    centers = (cells + 0.5) / q
    norms = np.linalg.norm(centers, axis=1)
    keys = tuple(cells[:, j] for j in range(d - 1, -1, -1)) + (norms,)
    order = np.lexsort(keys)
    ordered = cells[order]
    rank = np.empty(q ** d, dtype=np.int64)
    rank[ravel_coords(ordered, lvl)] = np.arange(q ** d)

    s_cells = ordered[:m]
    upper = (s_cells + 1.0) / q
    r_s = float(np.linalg.norm(upper, axis=1).max())
    if m < q ** d:
        lower_rest = ordered[m:] / q
        r_in = float(np.linalg.norm(lower_rest, axis=1).min())
    else:
        r_in = math.inf

    threshold = r_s + q ** (-params.beta * params.gamma / d)
    lower_all = cells / q
    a0_sel = np.linalg.norm(lower_all, axis=1) >= threshold - 1e-12
    a0_cells = cells[a0_sel]
    a0_mask = np.zeros(q ** d, dtype=bool)
    a0_mask[ravel_coords(a0_cells, lvl)] = True

    mass_s = m * float(q) ** (-d)
    vol_a0 = len(a0_cells) * float(q) ** (-d)
    if mass_s >= 1.0 - 1e-12:
        c0 = 0.0
    elif vol_a0 <= 0.0:
        raise ValueError("outer region is empty but mass remains to place")
    else:
        c0 = (1.0 - mass_s) / vol_a0
    return SupportGeometry(params, ordered, rank, r_s, r_in, a0_cells, a0_mask, c0)


def bump_phi(x, params: BumpParams):
    """The normalized radial bump C * u(||x||_2)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    vals = params.holder_C * bump_u(np.linalg.norm(pts, axis=1), params.v)
    return float(vals[0]) if single else vals


def _dist_to_block(pts: np.ndarray, r_s: float) -> np.ndarray:
    return np.maximum(np.linalg.norm(pts, axis=1) - r_s, 0.0)


def eta_sigma(x, sigma: SigmaHypothesis, geom: SupportGeometry, params: BumpParams):
    """The regression function of hypothesis ``sigma``.

    On the i-th ordered cell (i < m_cells) this is a signed scaled bump; off
    the block it grows like dist^(d/gamma) times a smooth ramp, clipped into
    [-1, 1] as a safety net for aggressively scaled parameter choices.
    """
    if len(sigma) != params.m_cells:
        raise ValueError("sigma length must equal m_cells")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    d, q = params.dim, params.q
    cells = cube_coords(pts, params.level)
    ranks = geom.rank_of_cell[ravel_coords(cells, params.level)]
    in_s = ranks < params.m_cells

    vals = np.empty(len(pts))
    if in_s.any():
        z = geom.cell_centers(cells[in_s])
        radial = np.linalg.norm(q * (pts[in_s] - z), axis=1)
        signs = sigma.arr[ranks[in_s]]
        vals[in_s] = signs * q ** (-params.beta) * params.holder_C * bump_u(radial, params.v)
    off = ~in_s
    if off.any():
        dist = _dist_to_block(pts[off], geom.r_S)
        psi = bump_u(0.5 - q ** (params.beta * params.gamma / d) * dist, params.v)
        raw = dist ** (d / params.gamma) * psi / (params.holder_C * math.sqrt(d))
        vals[off] = np.minimum(raw, 1.0)
    return float(vals[0]) if single else vals


def marginal_density_p(x, geom: SupportGeometry, params: BumpParams):
    """Marginal density evaluated from the geometry (not from the table).

    Constant on each sup-norm annulus around an active cell center, constant
    on the outer region, zero elsewhere; each active cell gets mass exactly
    q^-d.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    q = params.q
    cells = cube_coords(pts, params.level)
    flat = ravel_coords(cells, params.level)
    ranks = geom.rank_of_cell[flat]

    vals = np.zeros(len(pts))
    in_s = ranks < params.m_cells
    if in_s.any():
        z = geom.cell_centers(cells[in_s])
        dinf = np.max(np.abs(pts[in_s] - z), axis=1)
        annulus = (dinf > 2.0 ** (-params.r1) / q) & (dinf <= 2.0 ** (-params.r2) / q)
        sub = vals[in_s]
        sub[annulus] = params.annulus_density
        vals[in_s] = sub
    vals[geom.a0_mask[flat]] = geom.c0
    return float(vals[0]) if single else vals


def make_density_table(geom: SupportGeometry, params: BumpParams) -> MarginalSpec:
    """Materialize the marginal as an exact dyadic density table.

    Annulus boundaries sit on the level ``l + r1`` lattice, so classifying
    each level-(l+r1) cube by its center is exact.
    """
    lvl = params.table_level
    cover = DyadicCover.full(params.dim, lvl)
    coords = cover.coords_array
    centers = (coords + 0.5) / (1 << lvl)
    dens = marginal_density_p(centers, geom, params)
    table = {
        tuple(int(v) for v in coords[i]): float(dens[i])
        for i in range(len(coords)) if dens[i] > 0.0
    }
    return piecewise_marginal(params.dim, lvl, table, kind="minimax-annulus")


def _hamming(a: np.ndarray, b: np.ndarray) -> int:
    return int((len(a) - int(a @ b)) // 2)


def gilbert_varshamov(m_cells: int, rng: np.random.Generator,
                      max_tries: int = 1_000_000) -> list[SigmaHypothesis]:
    """Randomized greedy sign code with pairwise Hamming distance >= m/8.

    Returns at least ceil(2^(m/8)) codewords, the all-ones vector first.
    Existence is guaranteed, so the retry bound is never hit for m <= 64.
    """
    if m_cells < 8:
        raise ValueError("Gilbert-Varshamov construction needs m_cells >= 8")
    dmin = math.ceil(m_cells / 8.0)
    target = math.ceil(2.0 ** (m_cells / 8.0))
    code = [np.ones(m_cells, dtype=np.int64)]
    tries = 0
    while len(code) < target:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("retry bound exhausted while building the code")
        cand = rng.integers(0, 2, size=m_cells) * 2 - 1
        if all(_hamming(cand, word) >= dmin for word in code):
            code.append(cand)
    return [SigmaHypothesis(tuple(int(s) for s in w)) for w in code]


def kl_per_sample(x, sigma1: SigmaHypothesis, sigma2: SigmaHypothesis,
                  geom: SupportGeometry, params: BumpParams):
    """KL divergence of the label laws at x under the two hypotheses."""
    e1 = np.atleast_1d(eta_sigma(x, sigma1, geom, params))
    e2 = np.atleast_1d(eta_sigma(x, sigma2, geom, params))
    p1 = (1.0 + e1) / 2.0
    p2 = (1.0 + e2) / 2.0
    eps = 1e-15
    if np.any(p1 <= eps) or np.any(p1 >= 1 - eps) or np.any(p2 <= eps) or np.any(p2 >= 1 - eps):
        raise ValueError("degenerate label probability 0 or 1")
    kl = p1 * np.log(p1 / p2) + (1.0 - p1) * np.log((1.0 - p1) / (1.0 - p2))
    return float(kl[0]) if np.asarray(x, dtype=float).ndim == 1 else kl


def separation(sigma1: SigmaHypothesis, sigma2: SigmaHypothesis,
               geom: SupportGeometry, params: BumpParams) -> float:
    """Pi(sign eta_sigma1 != sign eta_sigma2): Hamming distance times q^-d.

    Exact because the two regression functions differ in sign precisely on
    the flipped cells and each active cell carries mass q^-d.
    """
    if len(sigma1) != params.m_cells or len(sigma2) != params.m_cells:
        raise ValueError("sigma length must equal m_cells")
    return _hamming(sigma1.arr, sigma2.arr) * float(params.q) ** (-params.dim)


def holder_constant(geom: SupportGeometry, params: BumpParams) -> float:
    """A sup-norm Hoelder constant for the whole regression function.

    Bump branch contributes holder_L by construction; the off-block radial
    profile is measured on a dense grid; both branches vanish on the
    interface, so their sum bounds cross-branch pairs for beta <= 1.
    """
    d, q = params.dim, params.q
    radii = np.linspace(max(geom.r_S - 0.05, 0.0), math.sqrt(d) + 0.05, (1 << 14) + 1)
    dist = np.maximum(radii - geom.r_S, 0.0)
    psi = bump_u(0.5 - q ** (params.beta * params.gamma / d) * dist, params.v)
    profile = np.minimum(dist ** (d / params.gamma) * psi / (params.holder_C * math.sqrt(d)), 1.0)
    k_off = d ** (params.beta / 2.0) * _radial_quotient(radii, profile, params.beta)
    return params.holder_L + k_off


def radius_sandwich(geom: SupportGeometry) -> tuple[int, bool]:
    """Sandwich of the ordered block between positive-orthant balls.

    Returns (k, ok): ok means there is an integer 1 <= k <= q sqrt(d) with
    B_+(0, k/q) inside the closed block and the block inside
    B_+(0, (k + 3 sqrt(d))/q).
    """
    params = geom.params
    q, d = params.q, params.dim
    k = int(math.floor(q * geom.r_inscribed + 1e-9))
    k = min(k, int(math.floor(q * math.sqrt(d))))
    ok = (
        1 <= k
        and k / q <= geom.r_inscribed + 1e-12
        and geom.r_S <= (k + 3.0 * math.sqrt(d)) / q + 1e-12
    )
    return k, ok


def _fit_noise_constant(eta_vals: np.ndarray, masses: np.ndarray, gamma: float,
                        t_grid: np.ndarray) -> float:
    """Smallest single constant C with Pi(|eta| <= t) <= C t^gamma on the grid."""
    a = np.abs(eta_vals)
    ratios = [(masses[a <= t].sum()) / t ** gamma for t in t_grid]
    return float(max(ratios))


def default_noise_grid() -> np.ndarray:
    return np.logspace(-2.0, 0.0, 25)


def make_minimax_problem(params: BumpParams | None = None,
                         sigma: SigmaHypothesis | None = None,
                         name: str = "minimax") -> Problem:
    """Package one hypothesis of the construction as a Problem oracle."""
    if params is None:
        params = make_bump_params()
    geom = build_geometry(params)
    if sigma is None:
        sigma = alternating_sigma(params.m_cells)
    table = make_density_table(geom, params)

    def eta(X, _s=sigma, _g=geom, _p=params):
        return eta_sigma(X, _s, _g, _p)

    quad_level = min(params.table_level + 4, 14 if params.dim == 1 else 10)
    pts, masses = table.quadrature(quad_level)
    c_hat = _fit_noise_constant(eta(pts), masses, params.gamma, default_noise_grid())
    u1, u2 = table.regularity_bounds(10)
    return Problem(
        name=name, dim=params.dim, beta=params.beta, gamma=params.gamma,
        noise_B=1.05 * c_hat, holder_B1=holder_constant(geom, params),
        assumption2_B2=None, regularity=(u1, u2), eta=eta, marginal=table,
        tags=("lower-bound-construction",),
    )
