"""Exception types raised across the package."""


class LLSError(Exception):
    """Base class for all errors raised by ``lls_cd``."""


class NotHermitian(LLSError, ValueError):
    pass


class NotUnitary(LLSError, ValueError):
    pass


class DimensionMismatch(LLSError, ValueError):
    pass


class LambdaOutOfRange(LLSError, ValueError):
    pass


class TimeOutOfRange(LLSError, ValueError):
    pass


class Singular(LLSError, ZeroDivisionError):
    pass


class DegenerateCoupling(LLSError, ArithmeticError):
    """A degenerate pair of levels is coupled by the perturbation."""


class FlatAction(LLSError, ArithmeticError):
    """The action does not depend on the variational coefficient."""


class GapClosure(LLSError, ArithmeticError):
    """Adjacent eigenvector samples are too far apart to track the phase."""


class ZeroNorm(LLSError, ZeroDivisionError):
    pass


class CalibrationFailed(LLSError, RuntimeError):
    def __init__(self, message, best_distance=None):
        super().__init__(message)
        self.best_distance = best_distance


class Infeasible(LLSError, ValueError):
    pass


class FitFailed(LLSError, RuntimeError):
    pass


class ConfigError(LLSError, ValueError):
    pass


# aliases matching the names used for pair checks in the dynamics layer
DegeneratePair = DegenerateCoupling
