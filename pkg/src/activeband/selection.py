"""Penalized selection of the dyadic resolution level.

Two code paths on purpose: the standalone scheme (penalty
m (s + log log2 N) on top of the dimension term) and the in-loop variant
used by the active learner (penalty offset m (log N + log(1/alpha)) relative
to the previous level, dimension scaled by the active-set mass).  They are
kept verbatim and are not unified.  "log" is the natural logarithm
throughout; the guarantees are constant-agnostic, this is fixed purely for
reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicCover
from .estimation import empirical_mean_fit, empirical_risk, l2_projection, restricted_dimension
from .problems import LabeledSample, Problem, pi_measure

__all__ = [
    "SelectionConfig",
    "index_set",
    "select_level",
    "select_level_scan",
    "oracle_level",
    "select_level_active",
    "DEFAULT_K1",
    "DEFAULT_K2",
]

# K1 calibrated on the tent problem so that the selected level stays below the
# oracle level in well over 95% of replications at N = 4096, s = 3 (the
# guarantee only promises existence of a large enough constant).
DEFAULT_K1 = 2.0
DEFAULT_K2 = 2.0

_MAX_LEVEL = 24


@dataclass(frozen=True)
class SelectionConfig:
    """Constants of the selection schemes.

    k1 multiplies the penalty, k2 defines the oracle level threshold, s is
    the confidence parameter of the standalone scheme (the learner passes
    s = log(N / alpha) through its own formula instead).
    """

    k1: float = DEFAULT_K1
    k2: float = DEFAULT_K2
    alpha: float = 0.05
    s: float = 3.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("penalty constants must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")


def index_set(n: int, d: int) -> list[int]:
    """Admissible resolution levels for n observations in dimension d.

    All m >= 1 with 2^(dm) <= n / log^2 n, plus the base level m = 0.
    """
    if n < 8:
        raise ValueError("need at least 8 observations")
    bound = n / math.log(n) ** 2
    levels = [0]
    m = 1
    while 2.0 ** (d * m) <= bound and m <= _MAX_LEVEL:
        levels.append(m)
        m += 1
    return levels


def select_level_scan(sample: LabeledSample, cfg: SelectionConfig,
                      n: int | None = None) -> list[tuple[int, float, float]]:
    """(level, empirical risk, penalty) for every admissible level."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    if n is None:
        n = len(sample)
    d = sample.xs.shape[1]
    loglog = math.log(math.log2(n))
    rows = []
    for m in index_set(n, d):
        fit = empirical_mean_fit(sample, m)
        risk = empirical_risk(fit, sample)
        pen = cfg.k1 * (2.0 ** (d * m) + m * (cfg.s + loglog)) / n
        rows.append((m, risk, pen))
    return rows


def select_level(sample: LabeledSample, cfg: SelectionConfig, n: int | None = None) -> int:
    """Penalized level choice; ties break toward the smaller level."""
    rows = select_level_scan(sample, cfg, n)
    best_m, best_obj = rows[0][0], rows[0][1] + rows[0][2]
    for m, risk, pen in rows[1:]:
        if risk + pen < best_obj - 1e-15:
            best_m, best_obj = m, risk + pen
    return best_m


def oracle_level(p: Problem, n: int, cfg: SelectionConfig,
                 quad_margin: int = 6) -> int:
    """Smallest level whose squared approximation bias meets k2 2^(dm) / n.

    The bias is the marginal-weighted squared distance between eta and its
    per-cube average, computed by quadrature; it is nonincreasing in m while
    the threshold grows, so the search terminates.
    """
    for m in range(1, _MAX_LEVEL + 1):
        quad = max(m + quad_margin, p.marginal.level)
        proj = l2_projection(p, m, quad)
        pts, masses = p.marginal.quadrature(quad)
        bias2 = float(masses @ (p.eta(pts) - proj(pts)) ** 2)
        if bias2 <= cfg.k2 * 2.0 ** (p.dim * m) / n:
            return m
    raise RuntimeError("oracle level search exceeded the level cap")


def select_level_active(sample: LabeledSample, base_m: int, a: DyadicCover,
                        p: Problem, cfg: SelectionConfig, total_budget: int,
                        n_k: int) -> int:
    """In-loop level choice of the active learner.

    Minimizes the empirical risk plus
    k1 (2^(dm) Pi(A) + (m - base_m)(log N + log(1/alpha))) / n over
    m >= base_m whose restricted dimension stays below n_act / log^2 n_act,
    where n_act = floor(n_k Pi(A)) is the round's label request and n is the
    size of the sample the criterion is evaluated on (equal to n_act when
    the full round sample is used; the sample-splitting variant passes its
    selection half).  Falls back to base_m when the search is empty or the
    sample is too small to refine.
    """
    pi_a = pi_measure(p, a)
    n_act = int(math.floor(n_k * pi_a))
    n_pen = len(sample)
    if n_act < 8 or n_pen < 4:
        return base_m
    d = p.dim
    dim_bound = n_act / math.log(n_act) ** 2
    s_unit = math.log(total_budget) + math.log(1.0 / cfg.alpha)
    level_cap = min(base_m + _MAX_LEVEL, 22 // d)

    best_m, best_obj = base_m, math.inf
    m = base_m
    while m <= level_cap:
        if restricted_dimension(a, m) > dim_bound:
            break
        fit = empirical_mean_fit(sample, m)
        risk = empirical_risk(fit, sample)
        pen = cfg.k1 * (2.0 ** (d * m) * pi_a + (m - base_m) * s_unit) / n_pen
        if risk + pen < best_obj - 1e-15:
            best_m, best_obj = m, risk + pen
        m += 1
    return best_m
