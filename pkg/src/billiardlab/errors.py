"""Exception hierarchy shared by all modules."""


class BilliardError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(BilliardError):
    pass


class VertexParam(GeometryError):
    """Tangent requested at a polygon vertex."""


class TangentialRay(GeometryError):
    pass


class NoReturn(GeometryError):
    """A Larmor arc never meets the boundary again."""


class ModelError(GeometryError):
    """Point on or outside the Klein disc."""


class DomainError(GeometryError):
    pass


class TieBreak(GeometryError):
    """Outer billiard support line is not unique."""


class ReflectionUndefined(BilliardError):
    pass


class FieldDegenerate(BilliardError):
    pass


class InvalidMasses(BilliardError):
    pass


class VertexHit(BilliardError):
    pass


class WindowExhausted(BilliardError):
    pass


class PathError(BilliardError):
    pass


class NotAlternating(BilliardError):
    pass


class BudgetExceeded(BilliardError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DegenerateChord(BilliardError):
    pass


class NoConvergence(BilliardError):
    pass


class NotPrimitive(BilliardError):
    pass


class InsufficientData(BilliardError):
    pass


class StiffnessError(BilliardError):
    pass


class ImplicitSingular(BilliardError):
    pass


class ConformalityError(BilliardError):
    """The Lee constant f - i_X eta drifted along a trajectory."""


class FormNotClosed(BilliardError):
    """The supplied one-form eta fails the finite-difference curl test."""


class ShapeError(BilliardError):
    pass


class LabelAmbiguous(BilliardError):
    pass


class BoundaryState(BilliardError):
    pass


class ConfigError(BilliardError):
    def __init__(self, message, line=None, key=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
        self.key = key


class SerializationError(BilliardError):
    pass
