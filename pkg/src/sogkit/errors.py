"""Exception hierarchy for sogkit.

Every exception raised on purpose by the library derives from `SogError`,
split into usage problems (`InvalidInput`) and numerical breakdowns
(`NumericalFailure`). The command line maps the two families onto exit
codes 2 and 3.
"""


class SogError(Exception):
    """Base class of all sogkit errors."""


class InvalidInput(SogError, ValueError):
    """The caller supplied arguments outside the documented domain."""


class NumericalFailure(SogError, ArithmeticError):
    """A numerical stage could not produce a trustworthy result."""


# --- numerics -------------------------------------------------------------

class NotSymmetric(InvalidInput):
    pass


class IndefiniteMatrix(NumericalFailure):
    pass


class ConvergenceFailure(NumericalFailure):
    pass


class SingularMatrix(NumericalFailure):
    pass


class DefectiveMatrix(SingularMatrix):
    pass


# --- kernels --------------------------------------------------------------

class InvalidParameter(InvalidInput):
    pass


class DomainError(InvalidInput):
    pass


# --- construction ---------------------------------------------------------

class NonDecayingKernel(InvalidInput):
    pass


class LengthMismatch(InvalidInput):
    pass


class QuadratureNotConverged(NumericalFailure):
    pass


# --- reduction ------------------------------------------------------------

class TargetUnreachable(InvalidInput):
    pass


class UnstablePole(NumericalFailure):
    pass

