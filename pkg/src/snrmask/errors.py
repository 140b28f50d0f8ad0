"""Exception types shared across the package."""


class FormatError(Exception):
    """A file exists but its contents do not match the expected format."""


class NumericError(Exception):
    """A computation produced an undefined or non-finite result."""
