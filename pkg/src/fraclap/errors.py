"""Exception hierarchy. The CLI maps these onto exit codes."""


class FraclapError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FraclapError, ValueError):
    """An argument lies outside its admissible set."""


class ConfigurationError(FraclapError, ValueError):
    """Inconsistent geometry or run configuration."""


class RegimeError(FraclapError):
    """Inputs violate the assumptions of the asymptotic theory."""


class ResolutionError(FraclapError):
    """The grid is too coarse for the requested feature."""


class ResourceError(FraclapError):
    """A dense allocation would exceed the memory cap."""


class SolverError(FraclapError):
    """A linear solve failed."""


class SingularityError(FraclapError, ValueError):
    """Evaluation requested at a singular point."""
