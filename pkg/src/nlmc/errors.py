"""Exception types shared across the package.

Every error carries an ``exit_code`` used by the command-line driver:
2 for data/configuration problems, 3 for numerical/solver problems.
"""


class NLMCError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InvalidArgumentError(NLMCError, ValueError):
    """A caller-supplied argument is out of range or inconsistent."""

    exit_code = 2


class MediumFormatError(NLMCError, ValueError):
    """A medium file violates the plain-text format."""

    exit_code = 2


class BinCoverageError(NLMCError, ValueError):
    """A coefficient value is not covered by any contrast bin."""

    exit_code = 2


class ConfigError(NLMCError, ValueError):
    """An experiment configuration is invalid."""

    exit_code = 2


class ConstraintDegeneracyError(NLMCError, RuntimeError):
    """A mean-value constraint has no support on the interior dofs."""

    exit_code = 3


class SolverError(NLMCError, RuntimeError):
    """A linear solve failed or did not reach the requested accuracy."""

    exit_code = 3


class UndefinedMetricError(NLMCError, ValueError):
    """An error metric is undefined because its denominator vanishes."""

    exit_code = 3
