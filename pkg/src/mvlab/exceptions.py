"""Exception hierarchy shared by every mvlab module."""


class MVLabError(Exception):
    """Base class for all errors raised by mvlab."""


class InvalidArgument(MVLabError, ValueError):
    """An argument violates a documented precondition."""


class EvaluationError(MVLabError, ArithmeticError):
    """A user-supplied or catalog function produced a non-finite value."""


class BlowUpError(EvaluationError):
    """A simulated state became NaN or infinite.

    Attributes
    ----------
    particle, step : int
        First offending particle index and grid step index.
    """

    def __init__(self, particle, step, message=None):
        self.particle = int(particle)
        self.step = int(step)
        if message is None:
            message = f"non-finite state at particle {self.particle}, step {self.step}"
        super().__init__(message)
