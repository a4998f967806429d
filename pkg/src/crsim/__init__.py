"""Competing-risks trial simulation and estimation toolkit.

Generates correlated two-cause event-time data from a Gumbel-Hougaard
copula, fits cause-specific (Cox) and subdistribution (Fine-Gray) hazard
models, runs Monte Carlo scenario grids, and reports results as CSV
tables and SVG figures.
"""

__version__ = "0.1.0"

from .datagen import (
    Arm,
    Cause,
    Scenario,
    Subject,
    TrialData,
    generate_trial,
    joint_survival,
    kendall_tau_from_alpha,
    sample_gumbel_pair,
    sample_gumbel_pairs,
    transform_to_event_times,
    trial_rng,
)
from .engine import (
    RepRecord,
    ScenarioGrid,
    ScenarioSummary,
    run_grid,
    run_replication,
    run_scenario,
)
from .estimators import (
    FitResult,
    StepFunction,
    aalen_johansen,
    cox_partial_loglik,
    fine_gray_partial_loglik,
    fit_cox,
    fit_fine_gray,
    km_censoring,
    km_survival,
)
from .reporting import (
    read_results_csv,
    render_bias_plot,
    render_estimate_plot,
    write_results_csv,
)

__all__ = [
    "Arm",
    "Cause",
    "FitResult",
    "RepRecord",
    "Scenario",
    "ScenarioGrid",
    "ScenarioSummary",
    "StepFunction",
    "Subject",
    "TrialData",
    "aalen_johansen",
    "cox_partial_loglik",
    "fine_gray_partial_loglik",
    "fit_cox",
    "fit_fine_gray",
    "generate_trial",
    "joint_survival",
    "kendall_tau_from_alpha",
    "km_censoring",
    "km_survival",
    "read_results_csv",
    "render_bias_plot",
    "render_estimate_plot",
    "run_grid",
    "run_replication",
    "run_scenario",
    "sample_gumbel_pair",
    "sample_gumbel_pairs",
    "transform_to_event_times",
    "trial_rng",
    "write_results_csv",
]
