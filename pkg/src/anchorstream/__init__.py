"""Anchor-stream capture-recapture estimation for enumerated closed populations."""

__version__ = "0.1.0"

from .tableau import (
    CellCounts,
    DesignContext,
    DesignError,
    IndividualRecord,
    design_context,
    tabulate,
    validate_design,
)
from .estimators import (
    CountEstimate,
    Method,
    PlanInputs,
    estimate_chapman,
    estimate_psi,
    estimate_psi_star,
    estimate_rs,
    fpc_factor,
    plan_sampling_rate,
)
from .intervals import (
    DegenerateVarianceError,
    IntervalMethod,
    IntervalResult,
    PosteriorConfig,
    dirichlet_adjusted_interval,
    dirichlet_unadjusted_interval,
    jeffreys_fpc_interval,
    select_credible_interval,
    wald_interval,
)
from .means import (
    BootstrapConfig,
    MeanEstimate,
    Target,
    bootstrap_mean,
    mean_overall,
    mean_subgroup,
    stream_means,
)
from .simlab import (
    Series1Config,
    Series2Config,
    SimSummaryRow,
    generate_population,
    rows_to_csv,
    rows_to_json,
    run_series1,
    run_series2,
)
