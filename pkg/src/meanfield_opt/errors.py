"""Exception and warning types shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the range where the quantity is defined."""


class NumericError(ArithmeticError):
    """A quadrature or root-finding routine failed to reach its tolerance."""


class CapacityError(ValueError):
    """An exact solver was asked for an instance beyond its size limit."""


class ContractError(ValueError):
    """An input violates the structural invariants an operation relies on."""


class PrecisionWarning(RuntimeWarning):
    """A result was clamped because it is not representable in float64."""
