"""Exception types shared across the package."""


class GraphError(ValueError):
    pass


class PreconditionError(ValueError):
    """An input does not satisfy the hypotheses of the check being run."""


class BoundViolation(AssertionError):
    """A deterministic inequality failed on an input that met its hypotheses.

    ``state`` carries whatever is needed to reproduce the failure.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}
