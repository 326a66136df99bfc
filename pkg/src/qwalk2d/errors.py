"""Exception hierarchy shared by all qwalk2d modules."""


class QWalkError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(QWalkError, ValueError):
    """A coin or model parameter is not a finite real number or is out of range."""


class InvalidStateError(QWalkError, ValueError):
    """A walk state violates its normalization or shape contract."""


class ConfigError(QWalkError, ValueError):
    """An experiment or run configuration is semantically invalid."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class WraparoundError(ConfigError):
    """The torus is too small for the requested number of steps."""


class NumericalError(QWalkError, ArithmeticError):
    """An eigen-solver or consistency check failed at a reported point."""


class InconsistencyError(NumericalError):
    """Flat bands expected by construction were not found."""


class NoGapError(NumericalError):
    """Edge-state detection requested for a gapless bulk."""


class NotWeaklyTrappingError(QWalkError, ValueError):
    """The coin does not satisfy cos 2*delta1 == cos 2*delta2."""


class UnsupportedBranchError(NotWeaklyTrappingError):
    """The coin lies on the delta2 = -delta1 + n*pi branch (no closed form)."""
