"""Exception hierarchy shared by every module.

Each error carries enough context (indices, field names) for the CLI to print
a field-level message and map the failure to an exit code.
"""

__all__ = [
    "CimError",
    "ValidationError",
    "DimensionError",
    "AsymmetryError",
    "TilingError",
    "DivergenceError",
    "InstanceFormatError",
]


class CimError(Exception):
    """Base class for all package errors."""


class ValidationError(CimError, ValueError):
    """Bad input: wrong shape, out-of-range parameter, incompatible options."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DimensionError(ValidationError):
    """Vector or matrix lengths disagree."""


class AsymmetryError(ValidationError):
    """A matrix handed to ``pack`` is not symmetric within tolerance."""

    def __init__(self, i, j, deviation):
        super().__init__(
            f"matrix is not symmetric: worst entry ({i}, {j}) deviates by {deviation:.3g}"
        )
        self.index = (i, j)
        self.deviation = deviation


class TilingError(ValidationError):
    """Tiling parameters do not divide the problem size."""


class DivergenceError(CimError, ArithmeticError):
    """A solver state became non-finite or exceeded the divergence guard."""

    def __init__(self, message, step=None, index=None):
        where = []
        if step is not None:
            where.append(f"step {step}")
        if index is not None:
            where.append(f"spin {index}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.step = step
        self.index = index


class InstanceFormatError(CimError, IOError):
    """Malformed instance, image or config file."""
