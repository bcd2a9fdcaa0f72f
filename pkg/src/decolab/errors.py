"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A grid, state, or run configuration violates a validity constraint."""


class StateDiagnosticError(RuntimeError):
    """A state does not have the structure an operation requires."""


class DegenerateStateError(StateDiagnosticError):
    """Probability density too small to normalize an observable against."""


class RunTooShortError(RuntimeError):
    """An evolution ended before the requested fit window was reached."""

    def __init__(self, message, suggested_n_steps=None):
        super().__init__(message)
        self.suggested_n_steps = suggested_n_steps


class TraceDriftError(RuntimeError):
    """Trace drifted beyond tolerance mid-run; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class RegimeWarning(UserWarning):
    """Parameters are outside the regime a formula or claim assumes."""
