"""Exception hierarchy shared by every module.

Each class carries the process exit code the command line front end uses
when the error escapes a command.
"""


class VNDilateError(Exception):
    exit_code = 1


class InvalidInputError(VNDilateError, ValueError):
    """Malformed or out-of-range input (non-finite entries, bad shapes)."""

    exit_code = 2


class StructureError(VNDilateError):
    """Input does not have the algebraic structure an operation requires."""

    exit_code = 4


class DegeneracyError(StructureError):
    """Near linear dependence where independence was required."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateInputError(StructureError):
    pass


class NumericError(VNDilateError, ArithmeticError):
    """Ill-conditioning that makes a result untrustworthy."""

    exit_code = 5


class DomainError(NumericError):
    pass


class CapacityError(VNDilateError):
    """A requested object or grid exceeds a configured size cap."""

    exit_code = 5
