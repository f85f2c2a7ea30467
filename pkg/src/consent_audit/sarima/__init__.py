"""Seasonal ARIMA fitting and forecasting on restriction time series."""

from .kernel import BACKEND
from .model import (
    FitError,
    Forecast,
    SarimaFit,
    SarimaParams,
    SarimaSpec,
    coefficient_table,
    default_grid,
    difference,
    fit,
    forecast,
    grid_search,
    loglikelihood,
    select_order,
    simulate,
)

__all__ = [
    "BACKEND",
    "FitError",
    "Forecast",
    "SarimaFit",
    "SarimaParams",
    "SarimaSpec",
    "coefficient_table",
    "default_grid",
    "difference",
    "fit",
    "forecast",
    "grid_search",
    "loglikelihood",
    "select_order",
    "simulate",
]
