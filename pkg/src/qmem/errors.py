"""Exception hierarchy for qmem."""


class QmemError(Exception):
    """Base class for all qmem errors."""


class InvalidDimension(QmemError, ValueError):
    pass


class InvalidMode(QmemError, IndexError):
    pass


class SignatureMismatch(QmemError, ValueError):
    pass


class TruncationError(QmemError, ValueError):
    """Requested amplitude does not fit in the truncated Fock space."""


class InvalidPopulation(QmemError, ValueError):
    pass


class InvalidState(QmemError, ValueError):
    pass


class IntegrationFailure(QmemError, RuntimeError):
    """Step size underflow or non-finite state during propagation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SelectivityError(QmemError, ValueError):
    """Selective pulse bandwidth is not small compared to the dispersive shift."""


class AliasingError(QmemError, ValueError):
    pass


class ResolutionError(QmemError, ValueError):
    pass


class FitError(QmemError, RuntimeError):
    """Non-convergence or rank-deficient Jacobian in a least-squares fit."""


class InconsistentRates(QmemError, ValueError):
    pass


class NotEvanescent(QmemError, ValueError):
    pass


class ConfigError(QmemError, ValueError):
    pass


class InsufficientData(QmemError, ValueError):
    """Too few data points for the requested fit."""
