"""Exception hierarchy shared by all regsat modules."""


class RegsatError(Exception):
    pass


class DomainError(RegsatError, ValueError):
    """Argument outside the domain of an operation."""


class NumericalError(RegsatError, ArithmeticError):
    """An iterative solver failed to converge or a root was not bracketed."""


class ConsistencyError(RegsatError, AssertionError):
    """Two independent computations of the same quantity disagree."""


class ResourceError(RegsatError, RuntimeError):
    """A hard size cap would be exceeded."""


class FormatError(RegsatError, ValueError):
    """Malformed or non-regular formula file."""


class SamplingError(RegsatError, RuntimeError):
    """A rejection sampler exhausted its retry budget."""
