"""Crop simulator emulation with weight-space uncertainty (bindings)."""

from pkgutil import extend_path

__path__ = extend_path(__path__, __name__)

from ._core import (  # noqa: E402
    ConfigError,
    Error,
    InputError,
    NumericError,
    ParseError,
    SwagPosterior,
    ValidationError,
    config_hash,
    county_names,
    decode_sample,
    f1_score,
    format_fraction_percent,
    load_config,
    output_names,
    parse_config,
    r2_from_mse,
    run_stage,
    simulate,
    sobol_points,
    variable_names,
)

__all__ = [
    "ConfigError",
    "Error",
    "InputError",
    "NumericError",
    "ParseError",
    "SwagPosterior",
    "ValidationError",
    "config_hash",
    "county_names",
    "decode_sample",
    "f1_score",
    "format_fraction_percent",
    "load_config",
    "output_names",
    "parse_config",
    "r2_from_mse",
    "run_stage",
    "simulate",
    "sobol_points",
    "variable_names",
]
