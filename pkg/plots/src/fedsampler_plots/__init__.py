"""Comparison figures from fedsampler metrics CSVs."""

from fedsampler_plots.plotting import (  # noqa: F401
    COLUMNS,
    SCHEMA_MARKER,
    SchemaError,
    SeriesSpec,
    load_series,
    moving_average,
    plot_compare,
)
