import json

from django.core.exceptions import ImproperlyConfigured

__all__ = [
    'SRError',
    'ConfigurationError',
    'DataError',
    'DimensionError',
    'EvaluationError',
    'FitError',
    'ParseError',
    'StateError',
    'StructuralError',
]


class SRError(Exception):
    """
    Base exception for everything microsr reports to its caller.

    Like an error response, an SRError carries a human readable `reason` and optional additional data (row and column
    of a bad cell, an offending feature index, a list of unmatched sample ids, ...). Management commands turn it into
    a single JSON line on the diagnostic stream and exit with `exit_status`.
    """

    exit_status = 1

    def __init__(self, reason, **additional_data):
        super(SRError, self).__init__(reason)
        self.reason = reason
        self.additional_data = additional_data

    def to_dict(self):
        data = {'error': self.reason}
        data.update(self.additional_data)
        return data

    def to_json(self):
        from .json import ReportEncoder
        return json.dumps(self.to_dict(), cls=ReportEncoder, sort_keys=True)


class StructuralError(SRError):
    """Malformed expression tree (arity mismatch, unknown primitive, non-finite constant)."""
    exit_status = 2


class ParseError(StructuralError):
    """S-expression text that doesn't follow the grammar."""

    def __init__(self, reason, position=None, expected=None, **additional_data):
        if position is not None:
            additional_data['position'] = position
        if expected is not None:
            additional_data['expected'] = expected
        super(ParseError, self).__init__(reason, **additional_data)
        self.position = position
        self.expected = expected


class DimensionError(SRError):
    """Lengths or indices that don't line up (labels vs. rows, feature index vs. columns)."""
    exit_status = 2


class DataError(SRError):
    """Input files violating the table or prediction file contract."""
    exit_status = 2


class ConfigurationError(SRError, ImproperlyConfigured):
    """Invalid configuration values or keys."""
    exit_status = 2


class EvaluationError(SRError):
    """Evaluating an expression produced (or was fed) a non-finite value or referenced a missing feature."""
    pass


class StateError(SRError):
    """Operation invoked on an object in the wrong state (unevaluated individual, unlabeled table)."""
    pass


class FitError(SRError):
    """A baseline model could not be fitted to the data it was given."""
    pass
