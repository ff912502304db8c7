"""Exception types shared across the solver suite."""


class CommuteqError(Exception):
    """Base class for all errors raised by this package."""


class ScenarioError(CommuteqError, ValueError):
    """Invalid scenario input: bad file, bad value, or violated invariant."""


class SolverError(CommuteqError, RuntimeError):
    """A numerical solve failed to bracket or converge.

    Attributes
    ----------
    diagnostics : dict
        Solver-specific payload (bracketing attempts, residuals, iteration
        counts) for post-mortem inspection.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
