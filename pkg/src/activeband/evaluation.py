"""Ground-truth risk functionals and numerical certificates.

Everything here integrates against the exact dyadic density tables of the
problem oracles, so quadrature weights carry no error; the only numerical
error is the midpoint rule on eta, with budget O(2^(-2(quad_level - m))) on
piecewise-smooth integrands.  Sup norms over sets are taken on corner
lattices (per cube, against the cube's own coefficient) so that piecewise
linear extremes at cube faces are captured exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import PiecewiseConstantFn, cube_coords, ravel_coords, sign_pm
from .estimation import l2_projection
from .problems import Problem

__all__ = [
    "excess_risk",
    "disagreement_mass",
    "sup_deviation_on_disagreement",
    "check_comparison",
    "ComparisonReport",
    "check_assumption2",
    "Assumption2Report",
    "fit_rate",
    "RateFit",
    "default_quad_level",
]


def default_quad_level(p: Problem, finest: int = 0) -> int:
    cap = 14 if p.dim == 1 else 10
    return max(min(cap, finest + 4), p.marginal.level, 10 if p.dim == 1 else 8)


def _as_values(f, pts: np.ndarray) -> np.ndarray:
    return f(pts)


def excess_risk(f, p: Problem, quad_level: int | None = None) -> float:
    """Risk above the Bayes optimum: the |eta|-weighted disagreement mass.

    ``f`` is any callable with real values; its sign (sign(0) = +1) is the
    classifier.
    """
    if quad_level is None:
        lvl = f.level if isinstance(f, PiecewiseConstantFn) else 0
        quad_level = default_quad_level(p, lvl)
    pts, masses = p.marginal.quadrature(quad_level)
    eta = p.eta(pts)
    disagree = sign_pm(_as_values(f, pts)) != sign_pm(eta)
    return float(np.sum(masses * np.abs(eta) * disagree))


def disagreement_mass(f, p: Problem, quad_level: int | None = None) -> float:
    """Marginal mass of {sign f != sign eta}."""
    if quad_level is None:
        lvl = f.level if isinstance(f, PiecewiseConstantFn) else 0
        quad_level = default_quad_level(p, lvl)
    pts, masses = p.marginal.quadrature(quad_level)
    disagree = sign_pm(_as_values(f, pts)) != sign_pm(p.eta(pts))
    return float(np.sum(masses * disagree))


def sup_deviation_on_disagreement(f, p: Problem, quad_level: int | None = None) -> float:
    """Sup of |f - eta| over the disagreement region, on the quadrature grid."""
    if quad_level is None:
        quad_level = default_quad_level(p)
    pts, _ = p.marginal.quadrature(quad_level)
    eta = p.eta(pts)
    vals = _as_values(f, pts)
    disagree = sign_pm(vals) != sign_pm(eta)
    if not disagree.any():
        return 0.0
    return float(np.max(np.abs(vals - eta)[disagree]))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stderr: float


def fit_rate(points) -> RateFit:
    """Least squares of log(risk) on log(N).

    ``points`` is a sequence of (N, risk) pairs with at least 4 budgets and
    strictly positive risks.
    """
    pts = [(float(n), float(r)) for n, r in points]
    if len(pts) < 4:
        raise ValueError("need at least 4 budgets")
    if any(r <= 0 for _, r in pts):
        raise ValueError("risks must be positive for a log-log fit")
    x = np.log([n for n, _ in pts])
    y = np.log([r for _, r in pts])
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = len(pts) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    return RateFit(slope, intercept, math.sqrt(s2 / sxx))


@dataclass(frozen=True)
class ComparisonReport:
    gamma: float
    thresholds: tuple[float, ...]
    excess: tuple[float, ...]
    sup_dev: tuple[float, ...]
    disagreement: tuple[float, ...]
    slope_vs_sup: float
    slope_vs_mass: float
    sup_ok: bool
    mass_ok: bool

    @property
    def passed(self) -> bool:
        return self.sup_ok and self.mass_ok


def check_comparison(family, p: Problem, quad_level: int | None = None) -> ComparisonReport:
    """Scaling check of the risk comparison inequalities on a plug-in family.

    ``family`` is a sequence of (t, f_t) with real-valued f_t and t
    decreasing to 0.  Certifies slopes only: log excess vs log sup-deviation
    at least (1 + gamma) - 0.1, and log excess vs log disagreement mass
    within [(1+gamma)/gamma - 0.1, (1+gamma)/gamma + 0.3].  The constants of
    the inequalities are distribution dependent and are not asserted.
    """
    if quad_level is None:
        quad_level = default_quad_level(p)
    rows = []
    for t, f in family:
        e = excess_risk(f, p, quad_level)
        s = sup_deviation_on_disagreement(f, p, quad_level)
        mass = disagreement_mass(f, p, quad_level)
        if t > 0 and e > 0 and s > 0 and mass > 0:
            rows.append((t, e, s, mass))
    if len(rows) < 4:
        raise ValueError("need at least 4 non-degenerate family members")
    ts, es, ss, ms = (np.asarray(v) for v in zip(*rows))
    slope_sup = fit_rate(list(zip(ss, es))).slope
    slope_mass = fit_rate(list(zip(ms, es))).slope
    g = p.gamma
    return ComparisonReport(
        gamma=g, thresholds=tuple(ts), excess=tuple(es), sup_dev=tuple(ss),
        disagreement=tuple(ms), slope_vs_sup=slope_sup, slope_vs_mass=slope_mass,
        sup_ok=slope_sup >= (1 + g) - 0.1,
        mass_ok=(1 + g) / g - 0.1 <= slope_mass <= (1 + g) / g + 0.3,
    )


@dataclass(frozen=True)
class Assumption2Report:
    min_ratio: float
    entries: tuple[tuple[int, float, float], ...]  # (level, threshold, ratio)
    skipped: tuple[tuple[int, float, str], ...]

    @property
    def certified_lower_bound(self) -> float:
        return self.min_ratio


def check_assumption2(p: Problem, levels, thresholds, quad_level: int) -> Assumption2Report:
    """Numerical certificate for the sup-vs-L2 comparison on boundary covers.

    For each level m and threshold t, builds the cover of level-m cubes
    meeting {|eta| <= t}, verifies it stays inside {|eta| <= 3t} (otherwise
    the pair is skipped as outside the assumption's scope), and returns the
    minimum over pairs of

        integral of (eta - etabar_m)^2 dPi(.|A)  /  sup_A (eta - etabar_m)^2.

    Pairs with vanishing residual are reported as skipped with ratio 1 by
    convention.
    """
    entries = []
    skipped = []
    for m in levels:
        quad = max(quad_level, m + 4, p.marginal.level)
        proj = l2_projection(p, m, quad)
        pts, masses = p.marginal.quadrature(quad)
        eta = p.eta(pts)
        anc = cube_coords(pts, m)
        flat = ravel_coords(anc, m)
        order = np.argsort(flat, kind="stable")
        flat_sorted = flat[order]
        uniq, starts = np.unique(flat_sorted, return_index=True)

        # per-cube min/max of |eta| on the quadrature grid
        abs_eta_sorted = np.abs(eta[order])
        mins = np.minimum.reduceat(abs_eta_sorted, starts)
        maxs = np.maximum.reduceat(abs_eta_sorted, starts)

        for t in thresholds:
            sel = mins <= t
            if not sel.any():
                skipped.append((m, float(t), "no cubes meet the threshold set"))
                continue
            if maxs[sel].max() > 3.0 * t:
                skipped.append((m, float(t), "cover escapes {|eta| <= 3t}"))
                continue
            chosen = set(int(u) for u in uniq[sel])
            in_a = np.isin(flat, uniq[sel])
            mass_a = float(masses[in_a].sum())
            if mass_a <= 0:
                skipped.append((m, float(t), "zero-mass cover"))
                continue
            resid = eta[in_a] - proj(pts[in_a])
            num = float(masses[in_a] @ resid ** 2) / mass_a

            sup2 = _sup_residual_sq(p, proj, sorted(chosen), m, quad)
            if sup2 <= 1e-24:
                skipped.append((m, float(t), "vanishing residual (ratio 1 by convention)"))
                continue
            entries.append((int(m), float(t), num / sup2))
    min_ratio = min((r for _, _, r in entries), default=1.0)
    return Assumption2Report(min_ratio, tuple(entries), tuple(skipped))


def _sup_residual_sq(p: Problem, proj: PiecewiseConstantFn, flat_cubes, m: int,
                     quad_level: int) -> float:
    """Max of (eta - coefficient)^2 over closed cubes, on a corner lattice.

    Each cube is compared against its own coefficient including its closed
    upper faces, which is where piecewise-linear residuals peak.
    """
    n = 1 << m
    side = (1 << (quad_level - m)) + 1
    ticks = np.linspace(0.0, 1.0, side)
    d = p.dim
    grids = np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    best = 0.0
    for flat in flat_cubes:
        digits = []
        rem = int(flat)
        for _ in range(d):
            digits.append(rem % n)
            rem //= n
        coords = np.asarray(digits[::-1], dtype=np.int64)
        pts = (coords.astype(float) + grids) / n
        coef = float(proj.values_at_cubes(coords[None, :])[0])
        best = max(best, float(np.max((p.eta(pts) - coef) ** 2)))
    return best
