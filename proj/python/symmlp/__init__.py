"""Multilayer perceptrons on symbolic data.

Tables, configs, architectures and reports are plain dicts/lists following the
same JSON schemas as the ``symmlp`` command-line tool.
"""

from ._symmlp import (
    DimensionError,
    EncodingError,
    ImputationError,
    ParseError,
    SelectionError,
    ValidationError,
    __version__,
    apply_coding,
    count_weights,
    count_weights_architecture,
    cross_entropy_loss,
    evaluate,
    fit_pipeline,
    forward,
    generate_stations,
    impute_knn,
    impute_mean,
    independent_cross_entropy_loss,
    initial_weights,
    interpolate_periodic,
    missing_months,
    parse_table,
    quadratic_loss,
    recode,
    run_experiment,
    stations_to_csv,
    surviving_months,
    weighted_multinomial_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
