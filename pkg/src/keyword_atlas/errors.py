"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class AtlasError(Exception):
    """Base class for all errors raised by this package."""


class NormalizationError(AtlasError):
    """A raw keyword could not be normalized (empty after trimming)."""


class ParseError(AtlasError):
    """An input file (mentions, aliases, associations) is malformed.

    Carries the offending line number(s) when known.
    """

    def __init__(self, message: str, *, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class QueryBuildError(AtlasError):
    """A search query expression could not be constructed."""


class ReplayError(AtlasError):
    """Offline mode needed a query that is not in the hit cache."""


class QueryError(AtlasError):
    """The catalogue rejected a query (HTTP 4xx other than 429)."""


class TransportError(AtlasError):
    """Network request failed after exhausting retries."""


class GraphBuildError(AtlasError):
    """The association graph could not be assembled from its inputs."""


class ContractError(AtlasError):
    """A caller violated an operation precondition."""


class PlacementError(AtlasError):
    """A word-cloud label could not be placed on the canvas."""


class ExportError(AtlasError):
    """Explorer export inputs do not cover the same node set."""


class ConfigError(AtlasError):
    """The pipeline configuration is missing or invalid."""


class DependencyError(AtlasError):
    """A stage was run before the stage(s) producing its inputs."""

    def __init__(self, message: str, *, missing_stage: str | None = None):
        super().__init__(message)
        self.missing_stage = missing_stage
