"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """A point lies outside the domain of a function."""


class ConditionError(ValueError):
    """A structural hypothesis (convexity, integrability, growth) fails."""


class NumericError(RuntimeError):
    """A numerical procedure could not produce a trustworthy answer."""


class UnsupportedCaseError(NotImplementedError):
    """The input falls in a branch the toolkit deliberately does not handle."""


class AlignmentError(ValueError):
    """A cube is not aligned with the cell lattice of a grid field."""
