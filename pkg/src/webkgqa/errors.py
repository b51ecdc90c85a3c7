"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
BackendError -> 3.
"""


class WebKgQaError(Exception):
    """Base class for package errors."""


class ConfigError(WebKgQaError):
    """Invalid configuration (bad values, violated invariants)."""


class DataError(WebKgQaError):
    """Unreadable or malformed input data (dataset, store, fixture files)."""


class BackendError(WebKgQaError):
    """A pluggable backend (chat, embedding, rerank, judge) failed."""
