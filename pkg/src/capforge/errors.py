"""Exception hierarchy shared by all capforge modules.

The CLI maps these onto exit codes: usage/config problems exit 1, data and
file-format problems exit 2.
"""


class CapforgeError(Exception):
    """Base class for all capforge errors."""


class ConfigError(CapforgeError):
    """Invalid configuration value or malformed config file."""


class DataError(CapforgeError):
    """Inconsistent or missing data (length mismatches, dangling refs, ...)."""


class FormatError(CapforgeError):
    """File exists but is not in a supported format/version."""


class IntegrityError(CapforgeError):
    """File is in the right format but its content is corrupt or truncated."""


class DomainError(CapforgeError):
    """Argument outside the mathematical domain of an operation."""
