class ContractViolation(ValueError):
    """Raised when an operation is called outside its preconditions."""


class DegenerateGradientError(ArithmeticError):
    """The H-gradient of G vanishes (or nearly so) where a normal was requested."""

    def __init__(self, x, norm):
        super().__init__(f"|D_H G|_H = {norm:.3e} below singularity threshold at x = {x!r}")
        self.x = x
        self.norm = norm


class SchemeFailure(RuntimeError):
    """A discrete reflection step failed; shrinking dt usually helps."""

    def __init__(self, message, state=None, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.state = state
        self.step = step
