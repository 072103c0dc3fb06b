"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid parameters or grid settings."""


class DomainError(ValueError):
    """Evaluation outside the region where a formula is defined."""


class NumericalError(RuntimeError):
    """A solver failed to converge or produced non-finite values."""


class FitError(NumericalError):
    """A modulation or rate fit did not converge."""
