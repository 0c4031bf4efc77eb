"""Beta ARMA modeling for unit-interval time series.

Conditional maximum-likelihood fitting, h-step forecasting, six prediction
interval constructions, residual diagnostics, interval-quality metrics, and a
reproducible Monte Carlo harness.
"""

from barma._backend import backend_name
from barma.diagnostics import arch_lm, box_pierce, default_lag_count, ljung_box
from barma.evaluation import (
    EvaluationReport,
    average_length,
    awd,
    coverage_rates,
    cwc,
    evaluate_window,
    picp,
    pinaw,
    winkler,
)
from barma.forecast import (
    ForecastSet,
    forecast_set,
    point_forecast,
    precision_horizon,
    prediction_error_variance,
    psi_weights,
)
from barma.intervals import (
    BcaDiagnostics,
    BootstrapConfig,
    IntervalSet,
    Method,
    bca_interval,
    bj_interval,
    block_bootstrap_series,
    bootstrap_forecast_path,
    bpe_interval,
    parametric_bootstrap_series,
    percentile_interval,
    qbeta_interval,
    residual_bootstrap_series,
)
from barma.model import (
    ConvergenceError,
    DegenerateSeriesError,
    FitOptions,
    FitResult,
    ModelSpec,
    ParameterVector,
    TimeSeries,
    conditional_means,
    fit_cmle,
    log_likelihood,
    residuals,
    select_order,
)
from barma.montecarlo import (
    Scenario,
    ScenarioRunConfig,
    built_in_scenarios,
    run_scenario,
    sensitivity_run,
    simulate_barma,
)
from barma.special import (
    BetaMeanPrecision,
    Link,
    beta_cdf,
    beta_quantile,
    link_apply,
    link_derivative,
    link_invert,
    log_beta_density,
    normal_cdf,
    normal_quantile,
    polygamma,
)

__version__ = "0.1.0"
