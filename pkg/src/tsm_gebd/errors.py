"""Exception types shared across the package.

Domain errors mean the data violates an invariant (bad indices, wrong
dimensions, non-finite values); format errors mean a file does not parse as
the format it claims to be.  I/O problems are left to the built-in OSError
hierarchy so callers can distinguish "bad data" from "bad disk".
"""


class DomainError(ValueError):
    """A value violates a documented invariant of its type or operation."""


class FormatError(ValueError):
    """A file or byte stream does not conform to its declared format."""
