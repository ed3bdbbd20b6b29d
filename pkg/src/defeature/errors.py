"""Exception hierarchy shared by every module of the package."""


class DefeatureError(Exception):
    """Base class for all errors raised by the package."""


# geometry
class InvalidPolygon(DefeatureError):
    pass


class FeatureOutsideDomain(DefeatureError):
    pass


class BooleanOpFailure(DefeatureError):
    pass


class UnclassifiableArc(DefeatureError):
    pass


class ExtensionViolation(DefeatureError):
    pass


class AlreadyInserted(DefeatureError):
    pass


# mesh
class SmallAngleInput(DefeatureError):
    pass


class NonconvergentRefinement(DefeatureError):
    pass


class UnknownLabel(DefeatureError):
    pass


class UnsupportedOrder(DefeatureError):
    pass


# fem
class SingularSystem(DefeatureError):
    pass


class IncompatibleData(DefeatureError):
    pass


class SolverDivergence(DefeatureError):
    pass


class PointOutsideDomain(DefeatureError):
    pass


class MissingSide(DefeatureError):
    pass


class MissingBoundaryData(DefeatureError):
    pass


# pipeline
class EmptyPositivePart(DefeatureError):
    pass


class MissingExtension(DefeatureError):
    pass


# estimator
class NonpositiveMeasure(DefeatureError):
    pass


class LabelNotInSigma(DefeatureError):
    pass


# adaptive
class NoFeatures(DefeatureError):
    pass


# scenario / cli
class ParseError(DefeatureError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaError(DefeatureError):
    pass


class ExpressionError(DefeatureError):
    def __init__(self, message, position, text=""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position} in {text!r}")


class OutputIOError(DefeatureError):
    pass
