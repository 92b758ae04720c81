"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its accuracy contract.

    Carries optional diagnostics (achieved residual/tolerance, partial
    values) so callers can report what was actually reached.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigError(ValueError):
    """Experiment configuration rejected; lists every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{field}: {reason}" for field, reason in self.violations)
        super().__init__(f"invalid configuration: {lines}")
