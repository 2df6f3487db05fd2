"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, data/validation
errors exit 2, numerical/convergence errors exit 3.
"""


class CtmsmError(Exception):
    """Base class for all package errors."""


class DomainError(CtmsmError, ValueError):
    """An argument is outside an operation's domain (e.g. negative time)."""


class InputError(CtmsmError, ValueError):
    """Structurally invalid input (e.g. non-finite weights, missing u)."""


class ValidationError(CtmsmError):
    """A trajectory or dataset violates a type invariant."""

    def __init__(self, violations, line=None):
        self.violations = list(violations)
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + "; ".join(self.violations))


class ParseError(CtmsmError):
    """A persisted file does not match the documented schema."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ConfigError(CtmsmError):
    """A configuration file or object is inconsistent."""


class SimulationConfigError(CtmsmError):
    """A discretized event probability reached 1; dt must shrink."""


class EvaluationError(CtmsmError):
    """A likelihood term became non-finite; names the offending subject."""


class DegenerateFitError(CtmsmError):
    """The weighted design is rank deficient (e.g. all exposures equal)."""


class ConvergenceError(CtmsmError):
    """An optimizer or sampler failed to meet its convergence contract."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class EstimatorError(CtmsmError):
    """Too many replicate failures inside an estimator pipeline."""


class SamplerError(CtmsmError):
    """MCMC diagnostics failure (e.g. a block rejected every proposal)."""
