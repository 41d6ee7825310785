"""Exception types raised across the package."""


class GEAError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GEAError, ValueError):
    """Input has the wrong shape, channel count or contains non-finite values."""


class DegenerateFitError(GEAError, ArithmeticError):
    """Normal equations of a matrix family are singular or ill-conditioned."""

    def __init__(self, family, condition: float):
        self.family = family
        self.condition = condition
        name = getattr(family, "value", family)
        super().__init__(
            f"degenerate fit for family {name!s}: Gram condition number {condition:.3g}"
        )


class DegenerateInputError(GEAError, ArithmeticError):
    """Image statistics make the requested quantity undefined (e.g. zero variance)."""


class EmptyRegionError(GEAError, ValueError):
    """A valid-region computation produced an empty rectangle."""
