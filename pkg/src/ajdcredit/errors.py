"""Exception hierarchy for the pricing library."""


class AjdCreditError(Exception):
    """Base class for all library errors."""


class DegenerateSigma(AjdCreditError):
    """Diffusion coefficient below the supported floor (Riccati roots divide by sigma^2)."""


class PoleCollision(AjdCreditError):
    """A pole of the closed-form coefficients was hit: 1 - theta*B vanished, or the
    Riccati denominator collapsed (argument outside the supported region)."""


class NumericalQuality(AjdCreditError):
    """A numerical result failed a built-in quality gate (e.g. inversion produced
    mass below the clipping threshold)."""


class SizeTooLarge(AjdCreditError):
    """Closed-form combinatorial evaluation requested beyond its validity bound."""


class InvalidDetachment(AjdCreditError):
    """Tranche detachment at or beyond the maximum basket loss."""


class InvalidRank(AjdCreditError):
    """Default rank outside [1, basket size)."""


class InvalidTranche(AjdCreditError):
    """Attachment/detachment pair does not define a tranche."""


class NoRoot(AjdCreditError):
    """Root search failed: the target value cannot be reached on the bracket."""


class NoSolution(AjdCreditError):
    """Bootstrap could not reprice a quote within the slope search bracket."""


class AnchorInvalid(AjdCreditError):
    """Swaption fast-method anchor gives a negative exercise boundary."""


class SchemaError(AjdCreditError):
    """Market/config file failed schema validation."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnitError(SchemaError):
    """A quoted number has ambiguous or conflicting units."""
