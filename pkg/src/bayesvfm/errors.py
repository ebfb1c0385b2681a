"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
NumericalError -> 3.
"""


class ConfigurationError(ValueError):
    """Invalid configuration, arguments, or file contents."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values.

    Carries a ``diagnostics`` dict (epoch, step, last losses, ...) when
    raised from a training loop, so a diverged run can be inspected.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
