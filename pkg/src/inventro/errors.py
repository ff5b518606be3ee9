"""Exception hierarchy shared by all inventro modules."""


class InventroError(Exception):
    """Base class for every error raised by this package."""


class IntegrationError(InventroError, ArithmeticError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class UnsupportedOperationError(InventroError, TypeError):
    pass


class DomainError(InventroError, ValueError):
    pass


class CapacityError(InventroError, MemoryError):
    pass


class EmptyControllerError(InventroError):
    """No grid cell admits an input keeping it inside the safe set."""

    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


class PartitionIntegrityError(InventroError):
    pass


class InvarianceViolationError(InventroError):
    pass


class SoundnessViolationError(InventroError):
    """A true trajectory left the controller domain."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(InventroError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
