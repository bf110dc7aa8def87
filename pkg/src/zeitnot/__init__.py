"""Competing-buyer optimal stopping: record chains, cutoff rules, duels."""

from .errors import (
    DomainError,
    NoCrossingError,
    NotStochasticError,
    ParameterError,
    SizeCapError,
    UnsupportedParameterError,
    ZeitnotError,
)
from .stopping_core import (
    PayoffSpec,
    TransitionMatrix,
    ValueSolution,
    drift_classification,
    fee_transform,
    stop_set,
    value_iterate,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "NoCrossingError",
    "NotStochasticError",
    "ParameterError",
    "PayoffSpec",
    "SizeCapError",
    "TransitionMatrix",
    "UnsupportedParameterError",
    "ValueSolution",
    "ZeitnotError",
    "drift_classification",
    "fee_transform",
    "stop_set",
    "value_iterate",
    "__version__",
]
