"""
Exception types shared across polaring.
"""

from typing import Optional


class PolaringError(Exception):
    """Base class for all polaring errors."""


class ConfigError(PolaringError, ValueError):
    """Invalid run configuration. Maps to CLI exit code 2."""

    def __init__(
        self,
        message: str,
        section: Optional[str] = None,
        key: Optional[str] = None,
        unit: Optional[str] = None,
    ):
        self.section = section
        self.key = key
        self.unit = unit
        location = ".".join(p for p in (section, key) if p)
        if location:
            message = f"[{location}] {message}"
        if unit:
            message = f"{message} (unit: {unit})"
        super().__init__(message)


class ModelError(PolaringError, ValueError):
    """Geometry, coupling or bath input that cannot describe a ring."""


class IntegrationError(PolaringError, ArithmeticError):
    """Non-finite state met while evaluating the equations of motion."""

    def __init__(self, message: str, site: Optional[int] = None, mode: Optional[int] = None):
        self.site = site
        self.mode = mode
        if site is not None:
            message = f"{message} (site {site}" + (f", mode {mode})" if mode is not None else ")")
        super().__init__(message)


class TrajectoryAborted(IntegrationError):
    """A trajectory went non-finite mid-run; its realization is excluded."""

    def __init__(self, message: str, step: int, realization: Optional[int] = None, **kwargs):
        self.step = step
        self.realization = realization
        super().__init__(message, **kwargs)


class ExclusionBudgetExceeded(PolaringError):
    """More realizations were excluded than the run allows. Exit code 3."""


class OutputExistsError(PolaringError, FileExistsError):
    """Output directory already holds results and --force was not given."""
