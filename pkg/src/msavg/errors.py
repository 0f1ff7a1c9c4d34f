"""Exception hierarchy shared by all modules."""


class MsavgError(Exception):
    """Base class for all library errors."""


class ConfigurationError(MsavgError):
    """Invalid arguments, grids, scenarios or config files."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class NumericError(MsavgError):
    """Divergent paths, non-convergent iterations and similar runtime failures."""
