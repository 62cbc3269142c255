"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input problems exit 1, configuration
problems exit 2 and anything unexpected exits 3.
"""


class FleetRiskError(Exception):
    """Base class for all errors raised by this package."""


class InputError(FleetRiskError):
    """Bad data handed to an operation (wrong shape, unreadable file, ...)."""


class ConfigError(FleetRiskError):
    """Invalid configuration value (bad kernel parameters, l % k != 0, ...)."""


class TrainingError(FleetRiskError):
    """Training cannot proceed on this data (single-class dataset, ...)."""


class StateError(FleetRiskError):
    """Operation called on a model in the wrong state (e.g. not calibrated)."""
