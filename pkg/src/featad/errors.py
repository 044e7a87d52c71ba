"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, DivergenceError -> 4.
"""


class FeatadError(Exception):
    """Base class for all package errors."""


class ConfigError(FeatadError):
    """Invalid configuration value or unknown configuration key."""


class DataError(FeatadError):
    """Inconsistent or malformed input data."""


class FormatError(DataError):
    """Malformed binary file; message carries the byte offset when known."""


class ManifestError(DataError):
    """Dataset manifest violates its contract."""


class MetricUndefinedError(DataError):
    """Metric requested on an input where it is mathematically undefined."""


class DegenerateDirectionError(FeatadError):
    """Synthesis direction undefined: feature coincides with its center."""

    def __init__(self, indices, message=None):
        self.indices = list(indices)
        if message is None:
            message = (
                f"synthesis direction undefined for {len(self.indices)} "
                f"vector(s); first offending flat indices: {self.indices[:8]}"
            )
        super().__init__(message)


class DivergenceError(FeatadError):
    """Training produced a non-finite loss or gradient."""
