"""Shared exception types.

The CLI maps these onto exit codes: ConfigError is a usage/configuration
problem (exit 1), DataError means the input data violated a contract
(exit 2), anything else is an internal error (exit 3).
"""


class ConfigError(Exception):
    """Invalid configuration file, flag value, or missing referenced path."""


class DataError(ValueError):
    """Input data violated a documented precondition (bad CSV, empty corpus, ...)."""
