"""Exception types shared across the package."""


class QRFlowError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(QRFlowError):
    """Operands have incompatible shapes."""


class ZeroColumn(QRFlowError):
    """A column to be triangularized has zero norm (rank-deficient X)."""

    def __init__(self, message, column=None, t=None):
        super().__init__(message)
        self.column = column
        self.t = t


class RankDeficient(QRFlowError):
    """Orthonormalization hit a numerically dependent column."""


class DivisionHazard(QRFlowError):
    """A coordinate right-hand side would divide by a dangerously small
    quantity; the caller must reimbed (or, for the u-variables, give up)."""


class DegenerateReflector(QRFlowError):
    """Reimbedding produced a numerically zero vector to reflect."""

    def __init__(self, message, column=None, t=None):
        super().__init__(message)
        self.column = column
        self.t = t


class DegenerateProbe(QRFlowError):
    """A Givens reimbedding probe lost unit norm (orthogonality decayed
    upstream)."""

    def __init__(self, message, column=None, t=None):
        super().__init__(message)
        self.column = column
        self.t = t


class IntegrationFailure(QRFlowError):
    """An integration run could not be continued; carries (t, column)."""

    def __init__(self, message, t=None, column=None):
        super().__init__(message)
        self.t = t
        self.column = column


class StepsizeUnderflow(IntegrationFailure):
    """The step controller drove h below its floor."""


class NonFiniteState(IntegrationFailure):
    """Coordinates stopped being finite (overflow in fixed-step mode)."""


class ConfigError(QRFlowError):
    """Invalid run configuration."""
