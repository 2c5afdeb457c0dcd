"""Exception types raised across the package."""


class CheapConvError(ValueError):
    """Base class for every rejection raised by cheapconv."""


class SpecError(CheapConvError):
    """A network description is malformed or cannot be built."""


class TransformError(CheapConvError):
    """A block substitution cannot be applied."""


class CostError(CheapConvError):
    """Cost accounting was asked for something it cannot evaluate."""


class ReportError(CheapConvError):
    """A table cannot be built, filtered or rendered as requested."""
