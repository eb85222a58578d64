"""Exception hierarchy shared by all stochext modules."""


class StochextError(Exception):
    """Base class for every error raised by this package."""


class ParseError(StochextError, ValueError):
    """Malformed formula text.

    ``position`` is the 0-based character offset where parsing failed.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnknownIdentifierError(ParseError):
    pass


class VariableIndexError(ParseError):
    pass


class DomainError(StochextError, ArithmeticError):
    """Evaluation left the real domain (log of non-positive, 1/0, ...)."""


class ModelError(StochextError, ValueError):
    """An Omega model violates its invariants."""


class UnsupportedModelError(StochextError, TypeError):
    pass


class ScenarioError(StochextError, ValueError):
    """Scenario file failed validation."""


class NumericalError(StochextError, RuntimeError):
    """A computation could not deliver a trustworthy result."""


class ToleranceNotMetError(NumericalError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class PanelBudgetExceededError(NumericalError):
    pass


class CostGuardError(NumericalError):
    pass


class StationaryPointInSupportError(NumericalError):
    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message)


class UnclassifiedPointError(NumericalError):
    pass


class NoStationaryPointError(NumericalError):
    pass


class MultipleStationaryPointsError(NumericalError):
    pass


class SingularHessianError(NumericalError):
    pass


class NonPositiveDensityError(NumericalError):
    pass


class WindingAmbiguousError(NumericalError):
    """|J| came too close to zero along the curve to decide the winding."""

    def __init__(self, message, lam=None):
        self.lam = lam
        super().__init__(message)


class DegenerateFitError(NumericalError):
    pass
