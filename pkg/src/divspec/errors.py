"""Exception hierarchy shared by all divspec modules."""


class DivspecError(Exception):
    """Base class for all errors raised by this package."""


class ExprSyntaxError(DivspecError):
    """Malformed expression text.

    Carries the byte offset of the failure and the set of tokens that
    would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}"
                         + (f" (expected one of: {', '.join(sorted(expected))})"
                            if expected else ""))
        self.offset = offset
        self.expected = frozenset(expected)


class EvalDomainError(DivspecError):
    """Expression evaluation left the real domain (log of non-positive,
    division by zero, sqrt of negative, ...)."""


class GeometryDegeneracyError(DivspecError):
    """The metric failed to be positive definite at a queried point."""


class UnsupportedOperationError(DivspecError):
    """Operation requires structure the chart does not carry
    (e.g. extrinsic curvature of an intrinsic chart)."""


class ConfigError(DivspecError):
    """Invalid scenario or domain configuration.

    `path` names the offending key or parameter.
    """

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class MeshTooCoarseError(DivspecError):
    """Mesh has no interior vertices, so no degrees of freedom."""


class AssemblyError(DivspecError):
    """Element-level failure during matrix assembly."""


class MassMatrixError(DivspecError):
    """Mass matrix is not symmetric positive definite."""


class SolverConvergenceError(DivspecError):
    """Eigensolver failed to reach the requested tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class InternalConsistencyError(DivspecError):
    """Recomputed certificate disagrees with a stored one."""


class HypothesisViolationError(DivspecError):
    """A declared special-function hypothesis fails numerically.

    `worst_point` is the sample point with the largest violation.
    """

    def __init__(self, message, worst_point=None, violation=None):
        if worst_point is not None:
            message = f"{message} (worst at {tuple(worst_point)}, violation {violation:g})"
        super().__init__(message)
        self.worst_point = worst_point
        self.violation = violation
