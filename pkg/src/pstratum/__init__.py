"""Principal-stratum causal effect estimation for randomized trials.

Estimates the effect of a randomized treatment on a binary (possibly
right-censored) long-term outcome among subjects who would exhibit an
intermediate response under treatment. The identification route: a logistic
model links a control non-responder's potential response under treatment to
their observed outcome and a discrete baseline covariate; matching the
model's per-level averages against empirically identified response-gain
probabilities yields the coefficients, and the fitted model fills in the
only unobservable piece of the contrast. Inference is via the pivotal
bootstrap; a Monte Carlo bench and a fixed-coefficient sensitivity sweep
round out the toolkit.
"""

from .bootstrap import (
    STRATIFIED_BY_ARM,
    WHOLE_SAMPLE,
    BootstrapConfig,
    bootstrap_estimate,
    pivotal_ci,
    resample,
)
from .data import (
    BINARY,
    SURVIVAL,
    BinaryOutcome,
    CausalEstimate,
    CountTable,
    Dataset,
    LevelDiagnostics,
    ModelParams,
    StratumProbabilities,
    SubjectRecord,
    SurvivalOutcome,
    ValidationReport,
    tabulate,
    validate,
)
from .empirical import (
    EmpiricalTables,
    KmCurve,
    estimate_stratum_probs,
    g_l_hat,
    g_r_hat,
    km_survival,
    outcome_prob_control,
    outcome_prob_treated_responders,
    stratum_probabilities,
)
from .errors import (
    DegenerateDenominator,
    EmptyArmAtLevel,
    EmptyCell,
    IncompleteFollowUpWarning,
    MalformedRecord,
    NoRootInBracket,
    ParseError,
    PstratumError,
    SchemaError,
    StratumNotIdentified,
    TooManyFailedReplicates,
    UnderIdentifiedWarning,
    ZeroResponderMass,
)
from .estimand import (
    ThetaBreakdown,
    estimate_theta,
    estimate_theta_always_responders,
    estimate_theta_at,
    fit_and_estimate,
    theta_from_tables,
)
from .model import (
    FitConfig,
    FitResult,
    analytic_gradient,
    fit_beta,
    g_m,
    jacobian_rank,
    objective,
    residuals,
)
from .sensitivity import SensitivityResult, sensitivity_sweep, solve_beta_x
from .simulation import (
    PRESET_NAMES,
    DgpSpec,
    McReport,
    SimulatedTrial,
    make_preset,
    mc_table,
    population_tables,
    run_monte_carlo,
    simulate_dataset,
    true_theta,
)

__version__ = "0.1.0"

__all__ = [
    "BINARY",
    "SURVIVAL",
    "WHOLE_SAMPLE",
    "STRATIFIED_BY_ARM",
    "PRESET_NAMES",
    "BinaryOutcome",
    "BootstrapConfig",
    "CausalEstimate",
    "CountTable",
    "Dataset",
    "DegenerateDenominator",
    "DgpSpec",
    "EmptyArmAtLevel",
    "EmptyCell",
    "EmpiricalTables",
    "FitConfig",
    "FitResult",
    "IncompleteFollowUpWarning",
    "KmCurve",
    "LevelDiagnostics",
    "MalformedRecord",
    "McReport",
    "ModelParams",
    "NoRootInBracket",
    "ParseError",
    "PstratumError",
    "SchemaError",
    "SensitivityResult",
    "SimulatedTrial",
    "StratumNotIdentified",
    "StratumProbabilities",
    "SubjectRecord",
    "SurvivalOutcome",
    "ThetaBreakdown",
    "TooManyFailedReplicates",
    "UnderIdentifiedWarning",
    "ValidationReport",
    "ZeroResponderMass",
    "analytic_gradient",
    "bootstrap_estimate",
    "estimate_stratum_probs",
    "estimate_theta",
    "estimate_theta_always_responders",
    "estimate_theta_at",
    "fit_and_estimate",
    "fit_beta",
    "g_l_hat",
    "g_m",
    "g_r_hat",
    "jacobian_rank",
    "km_survival",
    "make_preset",
    "mc_table",
    "objective",
    "outcome_prob_control",
    "outcome_prob_treated_responders",
    "pivotal_ci",
    "population_tables",
    "resample",
    "residuals",
    "run_monte_carlo",
    "sensitivity_sweep",
    "simulate_dataset",
    "solve_beta_x",
    "stratum_probabilities",
    "tabulate",
    "theta_from_tables",
    "true_theta",
    "validate",
]
