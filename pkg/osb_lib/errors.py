"""
Exception hierarchy for the outer billiard library.

Every error carries an exit code for the command line front end and a
JSON-safe ``details`` dict that ends up in the run log and error reports.
"""

from typing import Any, Dict, Optional


class OSBError(Exception):
    """Base class for all library errors"""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error_type': type(self).__name__,
            'error_message': self.message,
            'exit_code': self.exit_code,
            'details': self.details,
        }


class InvalidInputError(OSBError, ValueError):
    """Bad arguments: non-finite vectors, wrong dimensions, points inside the body"""

    exit_code = 2


class SingularPointError(InvalidInputError):
    """Gradient or Hessian requested at the origin"""


class SmoothnessError(InvalidInputError):
    """Derivative-based operation requested on a body that is only C1"""


class SpecParseError(InvalidInputError):
    """BodySpec schema or JSON syntax violation"""

    def __init__(self, message: str, path: str = '$', line: Optional[int] = None,
                 column: Optional[int] = None):
        details = {'path': path}
        if line is not None:
            details['line'] = line
            details['column'] = column
        super().__init__(f"{path}: {message}", details)
        self.path = path
        self.line = line
        self.column = column


class GateFailureError(OSBError):
    """A mathematical gate failed (self-polarity, convexity, seams)"""

    exit_code = 3


class ConstructionRejectedError(GateFailureError):
    """A body factory rejected its own output during validation"""

    def __init__(self, metric: str, value: float, threshold: float,
                 details: Optional[Dict[str, Any]] = None):
        merged = {'metric': metric, 'value': value, 'threshold': threshold}
        merged.update(details or {})
        super().__init__(
            f"construction rejected: {metric} = {value:.3e} exceeds {threshold:.3e}",
            merged,
        )
        self.metric = metric
        self.value = value
        self.threshold = threshold


class NumericFailureError(OSBError, RuntimeError):
    """An iterative solver did not converge"""

    exit_code = 4

    def __init__(self, message: str, best_value: Optional[float] = None,
                 residual: Optional[float] = None, iterations: Optional[int] = None,
                 details: Optional[Dict[str, Any]] = None):
        merged = {'best_value': best_value, 'residual': residual, 'iterations': iterations}
        merged.update(details or {})
        super().__init__(message, merged)
        self.best_value = best_value
        self.residual = residual
        self.iterations = iterations


class DegenerateBoundaryError(NumericFailureError):
    """Zero gradient at a boundary point"""
