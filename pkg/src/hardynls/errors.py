"""Exception hierarchy.

Every error carries a stable ``kind`` string and a process exit code so the
command-line layer can emit machine-readable error records without a lookup
table of its own.
"""

from __future__ import annotations


class HardyNLSError(Exception):
    kind = "internal"
    exit_code = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_record(self) -> dict:
        record = {"error": self.kind, "exit_code": self.exit_code, "message": self.message}
        if self.details:
            record["details"] = _jsonable(self.details)
        return record


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


class ConfigurationError(HardyNLSError):
    """Invalid configuration; ``violations`` lists every problem found."""

    kind = "configuration"
    exit_code = 2

    def __init__(self, message: str, violations=None, **details):
        self.violations = list(violations or [message])
        super().__init__(message, violations=self.violations, **details)


class UsageError(HardyNLSError):
    kind = "usage"
    exit_code = 3


class DomainError(HardyNLSError):
    kind = "domain"
    exit_code = 4


class SingularModelError(HardyNLSError):
    kind = "singular-model"
    exit_code = 5


class ResolutionError(HardyNLSError):
    kind = "resolution"
    exit_code = 6


class ConvergenceError(HardyNLSError):
    kind = "convergence"
    exit_code = 7


class CertificationError(HardyNLSError):
    kind = "certification"
    exit_code = 8


class OracleError(HardyNLSError):
    kind = "oracle"
    exit_code = 9


class StepFailure(HardyNLSError):
    kind = "step-failure"
    exit_code = 10


class IntegratorFailure(HardyNLSError):
    kind = "integrator-failure"
    exit_code = 11

    def __init__(self, message: str, series=None, **details):
        super().__init__(message, **details)
        self.series = series


class DataAvailabilityError(HardyNLSError):
    kind = "data-availability"
    exit_code = 12


class DependencyError(HardyNLSError):
    kind = "dependency"
    exit_code = 13


class StabilityViolation(HardyNLSError):
    """A subcritical run classified as blow-up (global existence says it cannot)."""

    kind = "stability-violation"
    exit_code = 14


class ConstructionError(HardyNLSError):
    kind = "construction"
    exit_code = 15


class UnsupportedError(HardyNLSError):
    kind = "unsupported"
    exit_code = 16
