"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage/config problems exit 1, data and
file-format problems exit 2, numeric failures exit 3.
"""


class ErpMotionError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ErpMotionError):
    """Invalid parameter or configuration value (CLI exit 1)."""


class ShapeError(ErpMotionError):
    """Array shape or aspect-ratio violation (CLI exit 2)."""


class FormatError(ErpMotionError):
    """Malformed or truncated file content (CLI exit 2)."""


class EstimationError(ErpMotionError):
    """Numeric estimation failure, e.g. degenerate least squares (CLI exit 3)."""
