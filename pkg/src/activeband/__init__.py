"""Active learning with plug-in classifiers and shrinking confidence bands.

Simulation library and experiment harness: dyadic geometry, synthetic
distribution oracles (including an executable lower-bound benchmark family),
histogram estimation with penalized level selection, the band-refinement
active learner with its passive baseline, and numerical certificates for the
statistical guarantees at desk scale.
"""

from .dyadic import (
    ConfidenceBand,
    CubeIndex,
    DyadicCover,
    PiecewiseConstantFn,
    cube_of_point,
    refine,
    sign_crossing_set,
    sign_pm,
)
from .estimation import (
    bernstein_deviation,
    bernstein_threshold,
    empirical_mean_fit,
    empirical_risk,
    fit_histogram,
    l2_projection,
)
from .evaluation import (
    check_assumption2,
    check_comparison,
    disagreement_mass,
    excess_risk,
    fit_rate,
)
from .learner import (
    DEFAULT_BAND_D,
    DEFAULT_LEARNER_K1,
    IterationRecord,
    LearnerConfig,
    RunTrace,
    classify,
    run_active,
    run_passive,
)
from .minimax import (
    BumpParams,
    SigmaHypothesis,
    SupportGeometry,
    bump_phi,
    bump_u,
    build_geometry,
    eta_sigma,
    gilbert_varshamov,
    kl_per_sample,
    make_bump_params,
    make_minimax_problem,
    marginal_density_p,
    separation,
)
from .problems import (
    LabeledSample,
    MarginalSpec,
    Problem,
    builtin_problems,
    constant_problem,
    draw_sample,
    pi_measure,
    sample_x,
    sample_y,
)
from .selection import (
    DEFAULT_K1,
    DEFAULT_K2,
    SelectionConfig,
    index_set,
    oracle_level,
    select_level,
    select_level_active,
)

__version__ = "0.1.0"
