"""Exception types raised by the solvers and the experiment harness."""


class PsaSecError(Exception):
    """Base class for all package errors."""


class SingularB(PsaSecError):
    """The right-hand matrix of a generalized eigenproblem is not positive definite."""


class MaxIterations(PsaSecError):
    """An iterative solver hit its iteration cap without converging."""


class Stalled(PsaSecError):
    """The rank-1 penalty loop stopped making progress above tolerance."""


class InvalidBracket(PsaSecError):
    """Bisection was started from a lower end that is not feasible."""


class Infeasible(PsaSecError):
    """The requested design target cannot be met."""


class DegenerateManifold(PsaSecError):
    """The array response to the desired signal vanishes."""


class DegenerateNullspace(PsaSecError):
    """Nulling constraints leave no room for the desired signal."""


class ConfigError(PsaSecError):
    """A scenario configuration is missing, malformed or inconsistent."""
