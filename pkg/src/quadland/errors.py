"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration: bad value, unknown key, or inconsistent setup."""


class CheckpointError(ConfigError):
    """Checkpoint file is unreadable or does not match the expected shapes."""


class IntegrationError(RuntimeError):
    """The integrator was handed a non-finite state."""


class TrainingError(RuntimeError):
    """Training hit a non-finite loss; carries a diagnostics dict."""

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
