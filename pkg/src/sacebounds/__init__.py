"""Sharp bounds on the survivor average causal effect.

Outcomes truncated by death are only defined for patients alive at the
measurement time.  This package bounds the treatment effect among patients
who would survive under either arm, using survival at every follow-up time,
a one-parameter copula between the two potential survival times, and a
linear program over fine-stratum outcome risks.  A Bayesian layer turns
trial counts into posterior medians and credible intervals for the bounds.
"""

from .bayes import (
    BayesConfig, CredibleInterval, PosteriorDraw, PosteriorSummary, RejectionBudgetError,
    posterior_bounds, posterior_params, sample_compatible, sample_zr, shortest_joint_ci,
    simulate_counts, summarize,
)
from .bounds import (
    BoundsResult, SweepResult, large_sample_bounds, observable_from_truth, survivor_contrast,
    sweep, true_sace, truth_bounds, zr_bounds,
)
from .copula import CopulaSpec, joint_pmf, phi_from_spearman, spearman_from_phi
from .model import (
    ArmCounts, CountData, FollowUpSchedule, GroundTruth, LargeSampleInput, MarginalSurvival,
    OutcomeRisk, ValidationError, validate,
)

__version__ = "0.1.0"

__all__ = [
    "ArmCounts", "BayesConfig", "BoundsResult", "CopulaSpec", "CountData", "CredibleInterval",
    "FollowUpSchedule", "GroundTruth", "LargeSampleInput", "MarginalSurvival", "OutcomeRisk",
    "PosteriorDraw", "PosteriorSummary", "RejectionBudgetError", "SweepResult", "ValidationError",
    "joint_pmf", "large_sample_bounds", "observable_from_truth", "phi_from_spearman",
    "posterior_bounds", "posterior_params", "sample_compatible", "sample_zr",
    "shortest_joint_ci", "simulate_counts", "spearman_from_phi", "summarize",
    "survivor_contrast", "sweep", "true_sace", "truth_bounds", "validate", "zr_bounds",
]
