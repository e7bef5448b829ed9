"""
Exception hierarchy for the correlation network toolkit.

Every error raised on purpose by the library derives from
NetworkAnalysisError so the CLI can report it and exit non-zero.
"""

from typing import Optional


class NetworkAnalysisError(Exception):
    """Base class for all library errors."""


class DataParseError(NetworkAnalysisError):
    """Error tied to a location inside an input file."""

    def __init__(self, message: str, path: Optional[str] = None,
                 row: Optional[int] = None, column: Optional[str] = None):
        self.message = message
        self.path = path
        self.row = row
        self.column = column
        super().__init__(self.__str__())

    def __str__(self) -> str:
        location = []
        if self.path:
            location.append(f"file={self.path}")
        if self.row is not None:
            location.append(f"row={self.row}")
        if self.column:
            location.append(f"column={self.column}")
        if location:
            return f"{self.message} ({', '.join(location)})"
        return self.message


# Ingestion
class EmptyInput(DataParseError):
    pass


class MalformedRow(DataParseError):
    pass


class NonMonotonicTimestamps(DataParseError):
    pass


class OhlcInconsistent(DataParseError):
    pass


class NonDivisibleHorizon(NetworkAnalysisError):
    pass


class AllMissing(NetworkAnalysisError):
    pass


class NonPositivePrice(NetworkAnalysisError):
    pass


class TooShort(NetworkAnalysisError):
    pass


class InsufficientSamples(NetworkAnalysisError):
    pass


class DegenerateSeries(NetworkAnalysisError):
    pass


class MissingData(NetworkAnalysisError):
    """A symbol has no usable bars for a horizon."""

    def __init__(self, symbol: str, horizon_s: Optional[int] = None, reason: str = 'no data'):
        self.symbol = symbol
        self.horizon_s = horizon_s
        where = f" at horizon {horizon_s}s" if horizon_s is not None else ''
        super().__init__(f"Missing data for {symbol}{where}: {reason}")


# Correlation
class ZeroVariance(NetworkAnalysisError):
    def __init__(self, index: int, symbol: Optional[str] = None):
        self.index = index
        self.symbol = symbol
        label = f" ({symbol})" if symbol else ''
        super().__init__(f"Series {index}{label} has zero sample variance")


class TooFewSamples(NetworkAnalysisError):
    pass


class EmptyPercentileList(NetworkAnalysisError):
    pass


class SectorTooSmall(NetworkAnalysisError):
    pass


class UnknownSector(NetworkAnalysisError):
    pass


# Parsing of named options
class UnknownKind(NetworkAnalysisError, ValueError):
    pass


# Filtering
class DimensionMismatch(NetworkAnalysisError):
    pass


class TooFewNodes(NetworkAnalysisError):
    pass


# Validation
class DegenerateReplica(NetworkAnalysisError):
    pass


class EmptyLinkList(NetworkAnalysisError):
    pass


class InvalidResampleCount(NetworkAnalysisError):
    pass


# Analysis
class EmptyGroup(NetworkAnalysisError):
    pass


class GroupIsEntireGraph(NetworkAnalysisError):
    pass


class Disconnected(NetworkAnalysisError):
    pass


class EdgelessGraph(NetworkAnalysisError):
    pass


class InconsistentUniverse(NetworkAnalysisError):
    pass


class UnknownGroupMember(NetworkAnalysisError):
    pass


class TooFewHorizons(NetworkAnalysisError):
    pass


# Synthetic data
class InvalidSpec(NetworkAnalysisError):
    pass


# Pipeline and reporting
class ConfigError(NetworkAnalysisError):
    pass


class IncompleteManifest(NetworkAnalysisError):
    pass


class ExportError(NetworkAnalysisError):
    pass


class UnsupportedFormat(ExportError):
    pass


class HorizonError(NetworkAnalysisError):
    """Wraps a module error with the horizon it happened at."""

    def __init__(self, horizon_s: int, cause: Exception, artifacts=None):
        self.horizon_s = horizon_s
        self.cause = cause
        # HorizonArtifacts written before the failure, if any
        self.artifacts = artifacts
        super().__init__(f"Horizon {horizon_s}s: {cause}")


class InvalidPanel(NetworkAnalysisError):
    """A return panel violates its shape or finiteness invariants."""
