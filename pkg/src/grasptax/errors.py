"""Exception and warning types.

Every error raised by the package derives from :class:`GraspTaxError`.
Input/configuration problems are :class:`ValidationError` (CLI exit code 1);
numerical breakdowns are :class:`NumericalError` (CLI exit code 2).
"""


class GraspTaxError(Exception):
    """Base class for all package errors."""


class ValidationError(GraspTaxError, ValueError):
    """Bad input, schema or configuration."""


class NumericalError(GraspTaxError, ArithmeticError):
    """A computation failed for numerical reasons."""


# ingestion
class MissingFile(ValidationError, FileNotFoundError):
    pass


class SchemaError(ValidationError):
    pass


class DuplicateFrameId(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class EmptyMap(ValidationError):
    pass


class MissingStream(ValidationError):
    """A pipeline stage needs a stream the manifest does not provide."""


# registration / fusion
class DegeneratePose(ValidationError):
    pass


class ConfigMismatch(ValidationError):
    pass


class TooFewRows(ValidationError):
    pass


class RowMismatch(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


# clustering / selection
class KExceedsN(ValidationError):
    pass


NonFiniteData = NonFiniteValue


class DimensionMismatch(ValidationError):
    pass


class RangeTooNarrow(ValidationError):
    pass


class SingularCovariance(NumericalError):
    pass


# metrics
class SingleCluster(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class UnknownCluster(ValidationError, KeyError):
    pass


class MissingLabels(ValidationError):
    pass


# temporal
class EvenWindow(ValidationError):
    pass


class MissingTaskIds(ValidationError):
    pass


# report
class ImageTooSmall(ValidationError):
    pass


class MissingSharpness(ValidationError):
    pass


class WriteFailure(GraspTaxError, OSError):
    pass


# pipeline artifacts
class ConfigHashMismatch(ValidationError):
    """A stage input was produced under a different configuration."""


class DisconnectedGraphWarning(UserWarning):
    pass


class LowCurvatureWarning(UserWarning):
    """The BIC curve has no pronounced elbow."""


class EmptyModelWarning(UserWarning):
    """Every cluster was removed by the minimum-size filter."""
