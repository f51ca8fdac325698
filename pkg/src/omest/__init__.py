"""Exact Bayesian estimates of the items two independent searches both missed."""

from importlib import resources

from .classical import chapman, classical_report, lincoln_petersen, poisson_diagnostics, seber_variance
from .moments import (
    InvalidCounts,
    MomentReport,
    Scenario,
    ScenarioKind,
    SearchCounts,
    Undefined,
    flat_prior_error_bounds,
    kurtosis_exact,
    mean_exact,
    moment_report,
    raw_moment,
    sd_exact,
    skewness_exact,
    variance_exact,
)
from .posterior import (
    BudgetExceededError,
    DivergentSeriesError,
    PosteriorTable,
    build_table,
    credible_interval,
    log_weight,
    mode,
    normalization_exact,
    table_moment,
)

__version__ = "0.1.0"


def report_schema() -> dict:
    """The JSON schema that ``omest estimate --json`` output satisfies."""
    import json

    return json.loads(resources.files(__name__).joinpath("schemas/report.schema.json").read_text())


__all__ = [
    "BudgetExceededError",
    "DivergentSeriesError",
    "InvalidCounts",
    "MomentReport",
    "PosteriorTable",
    "Scenario",
    "ScenarioKind",
    "SearchCounts",
    "Undefined",
    "build_table",
    "chapman",
    "classical_report",
    "credible_interval",
    "flat_prior_error_bounds",
    "kurtosis_exact",
    "lincoln_petersen",
    "log_weight",
    "mean_exact",
    "mode",
    "moment_report",
    "normalization_exact",
    "poisson_diagnostics",
    "raw_moment",
    "report_schema",
    "sd_exact",
    "seber_variance",
    "skewness_exact",
    "table_moment",
    "variance_exact",
]
