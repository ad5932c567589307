"""Exception types raised across the package."""


class LatticeKinError(Exception):
    """Base class for all package-specific errors."""


class DegenerateBandsError(LatticeKinError):
    """Band eigenfrequency vanished; the sub-lattice rotation is undefined."""


class UnsupportedChannelError(LatticeKinError):
    """No closed-form strong-coupling expression exists for this channel."""


class TableTooLargeError(LatticeKinError):
    """Scattering table would exceed the configured entry budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"scattering table needs {required} entries, budget is {budget}; "
            f"raise max_entries to at least {required}"
        )


class StepUnderflowError(LatticeKinError):
    """Adaptive step size fell below dt_min (stiffness or a bug)."""


class EmptyRegionError(LatticeKinError):
    """No grid modes fall inside the requested energy window."""


class InsufficientDataError(LatticeKinError):
    """Too few non-saturated modes for a Fermi-Dirac fit."""


class ConfigParseError(LatticeKinError):
    """Malformed config text; carries 1-based line and column numbers."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ConfigValidationError(LatticeKinError):
    """Config parsed fine but violates an invariant; names the offender."""

    def __init__(self, name: str, message: str):
        self.name = name
        super().__init__(f"{name}: {message}")


class TableCacheError(LatticeKinError):
    """Table cache file is corrupt or inconsistent with the run config."""
