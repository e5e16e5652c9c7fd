"""
Exceptions raised by the lab.

Bad input is a ValueError, a computation that could not be carried out is a
RuntimeError, so callers that only know the builtin types still catch them.
"""


class LabError(Exception):
    pass


class PreconditionError(LabError, ValueError):
    """Input violates a stated precondition or theorem hypothesis."""


class LayoutError(PreconditionError):
    pass


class DomainError(PreconditionError):
    pass


class ParameterError(PreconditionError):
    pass


class ShapeError(PreconditionError):
    pass


class DegenerateResonanceError(PreconditionError):
    pass


class RangeError(PreconditionError):
    pass


class RealityError(PreconditionError):
    pass


class EmptyRecordError(PreconditionError):
    pass


class ConfigError(PreconditionError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownKeyError(ConfigError):
    pass


class MissingSectionError(ConfigError):
    pass


class NumericalError(LabError, RuntimeError):
    """A computation ran but its result cannot be trusted."""


class DivergenceError(NumericalError):
    pass


class ResolutionError(NumericalError):
    pass


class InstabilityError(NumericalError):
    pass


class ResolutionWarning(UserWarning):
    pass
