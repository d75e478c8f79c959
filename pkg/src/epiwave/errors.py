"""Exception hierarchy shared by all epiwave modules."""


class EpiwaveError(Exception):
    """Base class for every error raised by this package."""


# parameters
class ParameterError(EpiwaveError, ValueError):
    pass


class RBelowOne(ParameterError):
    pass


class KOutOfRange(ParameterError):
    pass


class MuOutOfRange(ParameterError):
    pass


class NoRootInUnitInterval(EpiwaveError):
    pass


class SpeedBelowMinimal(EpiwaveError, ValueError):
    pass


# numerics
class ZeroPivot(EpiwaveError, ArithmeticError):
    pass


class SingularCore(EpiwaveError, ArithmeticError):
    pass


class SingularSchurComplement(EpiwaveError, ArithmeticError):
    pass


class StepSizeUnderflow(EpiwaveError):
    pass


class MaxIterationsExceeded(EpiwaveError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class LineSearchFailed(MaxIterationsExceeded):
    pass


class SingularJacobian(EpiwaveError, ArithmeticError):
    pass


# pde
class BadIcSpec(EpiwaveError, ValueError):
    pass


class CflViolation(EpiwaveError, ValueError):
    pass


class NonFiniteField(EpiwaveError, FloatingPointError):
    pass


class InsufficientSamples(EpiwaveError):
    pass


# traveling waves
class NewtonFailed(EpiwaveError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class GuessRejected(EpiwaveError, ValueError):
    pass


class BoundsViolated(EpiwaveError):
    pass


class TailTooShort(EpiwaveError):
    pass


# kpp comparison
class SpeedTooSmall(EpiwaveError, ValueError):
    pass


class WindowExceeded(EpiwaveError):
    pass


class OutOfRegime(EpiwaveError, ValueError):
    pass


class LevelNotCrossed(EpiwaveError):
    pass


class AlignmentImpossible(EpiwaveError):
    pass


# cli / output
class ConfigError(EpiwaveError, ValueError):
    """Bad configuration; ``key`` names the offending entry when there is one."""

    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class EmptySeries(EpiwaveError, ValueError):
    pass
