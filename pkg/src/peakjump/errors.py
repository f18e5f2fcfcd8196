"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes; library users can catch
:class:`PeakjumpError` to get everything at once.
"""

__all__ = ["PeakjumpError", "ConfigError", "DataError", "AnalysisError"]


class PeakjumpError(Exception):
    """Base class for all errors raised by peakjump."""

    exit_code = 1


class ConfigError(PeakjumpError):
    """Invalid run configuration (bad key, inconsistent bounds, bad ladder)."""

    exit_code = 2


class DataError(PeakjumpError):
    """Unreadable or invalid input data (CSV shape, domain violations)."""

    exit_code = 3


class AnalysisError(PeakjumpError):
    """Analysis cannot proceed (empty traces, no snapshots at the selected rung)."""

    exit_code = 4
