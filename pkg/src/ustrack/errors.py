"""Exception types shared across the toolkit."""


class UstrackError(Exception):
    """Base class for all toolkit errors."""


class LoadError(UstrackError):
    """A frame or file could not be read."""


class StructuralError(UstrackError):
    """Input data is internally inconsistent (sizes, dimensions, counts)."""


class ContractError(UstrackError):
    """An operation precondition was violated by the caller."""


class NotFoundError(UstrackError):
    """A named layer or label does not exist."""


class ValidationError(UstrackError):
    """A value is outside its allowed domain."""


class ParseError(UstrackError):
    """A persisted file is malformed."""


class SchemaVersionError(ParseError):
    """A persisted file declares an unsupported schema version."""


class GeometryError(UstrackError):
    """A geometric construction is degenerate (parallel or coincident lines)."""
