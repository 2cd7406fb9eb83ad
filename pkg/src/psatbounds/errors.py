class DomainError(ValueError):
    """Input outside the region where a formula or procedure is defined."""


class DegenerateTuning(DomainError):
    """The tuning system only has the gamma0 = 0 solution (k=2, p=1)."""


class NumericalFailure(ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""
