"""Exception types shared across modules; the CLI maps them to exit codes."""


class ANLSError(Exception):
    exit_code = 1


class ValidationError(ANLSError, ValueError):
    """Inputs violate a precondition (e.g. no solitons exist for these exponents)."""
    exit_code = 2


class NonConvergenceError(ANLSError, RuntimeError):
    """An iteration exhausted its budget.  ``residual`` holds the last value."""
    exit_code = 3

    def __init__(self, msg, residual=None, history=None, last=None):
        super().__init__(msg)
        self.residual = residual
        self.history = history or []
        self.last = last


class CollapseError(NonConvergenceError):
    """The iterate decayed to zero."""


class SolverTimeout(NonConvergenceError):
    """Wall-time budget exceeded."""


class InconsistencyError(ANLSError, RuntimeError):
    """Independent estimates of the same quantity disagree."""
    exit_code = 4


class ResolutionError(ANLSError, RuntimeError):
    """The grid does not resolve the profile (tails reach the box edge, windows too small)."""
    exit_code = 5


class BlowUpError(ANLSError, RuntimeError):
    """Propagation produced non-finite samples; ``last`` is the last finite state."""
    exit_code = 6

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last
