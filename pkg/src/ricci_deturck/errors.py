"""Exception types raised across the package."""


class NonPositiveDefinite(ValueError):
    """A nodal metric lost positive definiteness."""


class Blowup(NonPositiveDefinite):
    """Positivity was lost during time stepping (CFL violation or genuine blow-up)."""

    def __init__(self, message, state=None, records=None):
        super().__init__(message)
        self.state = state
        self.records = records or []


class ClosenessCeilingExceeded(RuntimeError):
    """The flow left the epsilon-closeness regime in which the diagnostics are meaningful."""

    def __init__(self, message, state=None, records=None):
        super().__init__(message)
        self.state = state
        self.records = records or []


class InsufficientData(ValueError):
    pass


class OutsideDomain(ValueError):
    pass


class MarkerEscaped(OutsideDomain):
    pass


class DegenerateJacobian(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Internal defect: an iteration hit its cap without converging."""


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
