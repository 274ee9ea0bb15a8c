"""Exception hierarchy shared by every module."""


class PssmpError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PssmpError, ValueError):
    """Invalid experiment configuration or invalid model parameters."""


class UnsupportedSpec(PssmpError):
    """Model outside the supported parametric catalogue."""


class InvalidGrid(PssmpError, ValueError):
    pass


class BudgetExceeded(PssmpError):
    pass


class OutOfRange(PssmpError, ValueError):
    pass


class HorizonTooShort(PssmpError):
    pass


class NonPositiveValue(PssmpError, ValueError):
    pass


class EmptyPath(PssmpError, ValueError):
    pass


class RegularityViolation(PssmpError):
    pass


class InconsistentInputs(PssmpError, ValueError):
    pass


class DeadPath(PssmpError):
    pass


class UnknownFunctional(PssmpError, KeyError):
    pass


class DivergenceDetected(PssmpError):
    pass


class NonConvergent(PssmpError):
    pass


class ArithmeticLattice(PssmpError):
    pass


class TooFewSamples(PssmpError, ValueError):
    pass
