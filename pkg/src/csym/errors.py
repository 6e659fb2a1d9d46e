class CsymError(Exception):
    pass


class InfiniteGroupError(CsymError, ValueError):
    """Raised when an operation needs a finite group but got one with free rank."""


class BoundExceededError(CsymError, ValueError):
    """Raised when an enumeration would exceed its configured size bound."""


class NotPrimeError(CsymError, ValueError):
    pass


class DimensionError(CsymError, ValueError):
    pass


class NoWitnessError(CsymError, ValueError):
    """Raised when an isotropy witness is requested for a non-isotropic map."""


class ModelError(CsymError, ValueError):
    """Raised for an invalid matrix model or entry distribution."""
