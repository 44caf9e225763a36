"""Error taxonomy shared across the package.

The CLI maps these onto its exit-code contract: configuration problems
exit 2, malformed or unreadable data files exit 3, and non-finite numerics
mid-run exit 4.
"""


class FedjamError(Exception):
    """Base class for all package errors."""


class ConfigError(FedjamError, ValueError):
    """Invalid configuration, argument, or domain value."""


class DataFormatError(FedjamError, ValueError):
    """Corrupt, truncated, or incompatible file content."""


class NumericError(FedjamError, RuntimeError):
    """Non-finite loss or other numeric failure during a run.

    ``partial_history`` carries whatever round records were completed
    before the failure so callers can flush them.
    """

    def __init__(self, message, partial_history=None):
        super().__init__(message)
        self.partial_history = partial_history if partial_history is not None else []


class ContractError(FedjamError, RuntimeError):
    """API misuse, e.g. a stale forward cache handed to backward."""
