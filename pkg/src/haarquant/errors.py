class HaarQuantError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HaarQuantError, ValueError):
    pass


class ResolutionError(HaarQuantError, ValueError):
    """The time grid is too coarse for the requested Haar level."""


class DegenerateSampleError(HaarQuantError, ValueError):
    """Fewer distinct sample values than requested codepoints."""


class SizeGuardError(HaarQuantError, ValueError):
    """Input too large for a brute-force routine."""


class InsufficientPointsError(HaarQuantError, ValueError):
    pass


class BudgetError(HaarQuantError, ValueError):
    """Codebook budget too small for the requested construction."""
