"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed (non-convergence, loss of positivity, ...).

    ``operation`` names the routine that failed; the CLI reports it and exits 3.
    """

    def __init__(self, message, operation=None):
        super().__init__(message)
        self.operation = operation


class CyclicityError(NumericalError):
    pass


class QuadratureError(NumericalError):
    def __init__(self, message, last_values=None, operation=None):
        super().__init__(message, operation=operation)
        self.last_values = last_values
