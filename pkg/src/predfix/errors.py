"""Exception types shared across the package."""


class PredfixError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(PredfixError):
    """Vector or matrix dimensions are inconsistent with the instance."""


class ZeroNormRow(PredfixError):
    """A constraint row has zero norm and cannot be normalized."""


class ZeroObjective(PredfixError):
    """The objective vector has zero norm and cannot be normalized."""


class TooManyBinaries(PredfixError):
    """Instance exceeds the exhaustive-enumeration cap."""


class IterationLimit(PredfixError):
    """Simplex exceeded its pivot budget; cycling is the likely cause."""


class EmptyDataset(PredfixError):
    """An operation that needs at least one instance received none."""


class MaximaExceeded(PredfixError):
    """A node has more nonzeros than the dataset-level padding maxima."""


class ShapeMismatch(PredfixError):
    """Tensor operands have incompatible shapes."""


class NonFiniteValue(PredfixError):
    """A NaN or Inf appeared; the offending operation is reported."""


class NotScalar(PredfixError):
    """backward() was called on a non-scalar tensor."""


class OddOrder(PredfixError):
    """Quadrature order must be even and at least 4."""


class MissingLabels(PredfixError):
    """Evaluation needs reference labels that are not present."""


class SizeExceedsOracle(PredfixError):
    """Generator settings produce instances the bundled oracle cannot label."""


class ConfigError(PredfixError):
    """Invalid or unknown configuration keys/values."""


class IoFailure(PredfixError):
    """File export or import failed."""
