"""Exception hierarchy shared by every module of the package."""


class HardTrapsError(Exception):
    """Base class for all package errors."""


class ParameterError(HardTrapsError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DimensionError(HardTrapsError, ValueError):
    """An operation was called on an environment of the wrong dimension."""


class DomainError(HardTrapsError, ValueError):
    """A site or region lies outside the domain the operation can see."""


class EmptySpectrumError(DomainError):
    """Spectral data requested for an empty site set."""


class SizeError(HardTrapsError, ValueError):
    """A dense computation would exceed its configured size cap."""


class DivergenceError(HardTrapsError, ArithmeticError):
    """A series or integral that must converge does not."""


class TimeTooSmallError(ParameterError):
    """The time is too small for the scaling bracket to be positive."""


class ConvergenceError(HardTrapsError, ArithmeticError):
    """An iterative eigensolver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
