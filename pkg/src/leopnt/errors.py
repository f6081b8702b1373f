"""Exception types shared across the package."""


class LeopntError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(LeopntError, ValueError):
    """A configuration or argument value violates its invariants."""


class OutOfBandError(LeopntError, ValueError):
    """A query point lies outside the service latitude band."""


class GeometryError(LeopntError):
    """A geometric precondition fails (e.g. satellite below the horizon)."""


class InsufficientVisibilityError(GeometryError):
    """A cell cannot see enough non-excluded satellites."""

    def __init__(self, cell_id, available, required):
        self.cell_id = cell_id
        self.available = available
        self.required = required
        super().__init__(
            f"cell {cell_id}: only {available} usable satellites in view, "
            f"{required} required"
        )


class EncodingError(LeopntError, ValueError):
    """A field value does not fit the configured bit layout."""


class SaturationError(LeopntError, ValueError):
    """A quantity that must be a fraction in [0, 1] (or a positive
    denominator) saturated; raised instead of silently returning it."""


class ParseError(LeopntError, ValueError):
    """A config, raster, or schedule file is malformed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where = f" [{where}]"
        super().__init__(f"{message}{where}")


class UndefinedRatioError(LeopntError, ValueError):
    """A peak/mean ratio is undefined (e.g. all-zero raster)."""
