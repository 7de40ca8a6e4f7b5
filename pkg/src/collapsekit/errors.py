"""Exception types shared across the package."""


class CollapsekitError(Exception):
    """Base class for every error raised by this package."""


class SchemeError(CollapsekitError, ValueError):
    """Invalid categorical scheme: duplicate names, too few levels, unknown variables."""


class TableError(CollapsekitError, ValueError):
    """Invalid table payload, or an operation applied to the wrong table form."""


class DistributionError(CollapsekitError, ValueError):
    """Invalid finite joint distribution or regression summary."""


class ModelError(CollapsekitError, ValueError):
    """Invalid parametric model specification or out-of-domain evaluation point."""


class RouteDisagreementError(CollapsekitError, RuntimeError):
    """Two mathematically equivalent computation routes disagreed.

    Raised when a verdict computed by independent formulas comes out
    inconsistent.  This signals an implementation bug (or a tolerance set
    exactly at the data's decision boundary), never a property of the data.
    """
