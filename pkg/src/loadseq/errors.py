from __future__ import annotations

from typing import Optional


class LoadSeqError(Exception):
    """Base error."""

class ShapeError(LoadSeqError, ValueError):
    """Raised when array dimensions, widths or step counts do not line up."""

class DomainError(LoadSeqError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""

class ConsistencyError(LoadSeqError, ValueError):
    """Raised when inputs contradict each other (mixed years, loads above peak ...)."""

class ConfigError(LoadSeqError):
    """Raised for malformed or unknown configuration."""

class ArtifactError(LoadSeqError):
    """Raised when a model document cannot be decoded."""

class FitError(LoadSeqError):
    """Raised when a baseline model cannot be fitted."""

class SearchError(LoadSeqError):
    """Raised when every trial of a hyperparameter search failed."""


class NumericError(LoadSeqError, ArithmeticError):
    """Raised when an intermediate value overflows to inf/nan."""

    def __init__(self, message: str, *, block: Optional[str] = None) -> None:
        super().__init__(message)
        self.block = block


class TrainingError(LoadSeqError):
    """Raised when the training loss stops being finite."""

    def __init__(self, message: str, *, epoch: Optional[int] = None) -> None:
        super().__init__(message)
        self.epoch = epoch
