"""Custom exception classes for the biotprecond package."""


class BiotPrecondError(Exception):
    """Base exception class for all biotprecond errors."""

    def __init__(self, message: str):
        """Initialize the BiotPrecondError.

        Args:
            message: Error message describing what went wrong.
        """
        super().__init__(message)
        self.message = message


# =============================================================================
# Argument and State Errors
# =============================================================================


class InvalidArgumentError(BiotPrecondError):
    """Raised when an argument is outside its admissible range."""

    def __init__(self, message: str = "Invalid argument", argument: str = None):
        """Initialize the InvalidArgumentError.

        Args:
            message: Error message describing the invalid argument.
            argument: Optional name of the offending argument.
        """
        super().__init__(message)
        self.argument = argument


class InvalidStateError(BiotPrecondError):
    """Raised when an operation is not defined for the current configuration."""

    def __init__(self, message: str = "Invalid state", state: str = None):
        """Initialize the InvalidStateError.

        Args:
            message: Error message describing the conflict.
            state: Optional name of the state that forbids the operation.
        """
        super().__init__(message)
        self.state = state


class DimensionMismatchError(BiotPrecondError):
    """Raised when operand sizes do not agree."""

    def __init__(
        self,
        message: str = "Dimension mismatch",
        expected: object = None,
        actual: object = None,
    ):
        """Initialize the DimensionMismatchError.

        Args:
            message: Error message describing the mismatch.
            expected: Expected size or shape.
            actual: Size or shape that was received.
        """
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class ParameterError(BiotPrecondError):
    """Raised when a derived physical quantity is undefined."""

    def __init__(self, message: str = "Invalid parameter", parameter: str = None):
        """Initialize the ParameterError.

        Args:
            message: Error message describing the parameter issue.
            parameter: Optional parameter name.
        """
        super().__init__(message)
        self.parameter = parameter


# =============================================================================
# Linear Algebra Errors
# =============================================================================


class NotPositiveDefiniteError(BiotPrecondError):
    """Raised when a matrix or operator expected to be SPD is not."""

    def __init__(
        self,
        message: str = "Matrix is not symmetric positive definite",
        pivot: int = None,
        value: float = None,
    ):
        """Initialize the NotPositiveDefiniteError.

        Args:
            message: Error message describing the failure.
            pivot: Optional index of the offending pivot.
            value: Optional value of the offending pivot.
        """
        super().__init__(message)
        self.pivot = pivot
        self.value = value


class NegativeCurvatureError(NotPositiveDefiniteError):
    """Raised when conjugate gradients meets a direction with p'Ap <= 0."""

    def __init__(
        self,
        message: str = "Negative curvature detected",
        report: object = None,
        value: float = None,
    ):
        """Initialize the NegativeCurvatureError.

        Args:
            message: Error message describing the failure.
            report: Partial KrylovReport up to the failing iteration.
            value: The curvature that was found.
        """
        super().__init__(message, value=value)
        self.report = report


# =============================================================================
# Configuration and Export Errors
# =============================================================================


class ConfigurationError(BiotPrecondError):
    """Configuration-related errors."""

    def __init__(self, message: str, config_key: str = None):
        """Initialize the ConfigurationError.

        Args:
            message: Error message describing the configuration issue.
            config_key: Optional configuration key that caused the error.
        """
        super().__init__(message)
        self.config_key = config_key


class ExportError(BiotPrecondError):
    """Raised when writing a table, dump or matrix file fails."""

    def __init__(self, message: str = "Export failed", path: str = None):
        """Initialize the ExportError.

        Args:
            message: Error message describing the export failure.
            path: Optional target path.
        """
        super().__init__(message)
        self.path = path
