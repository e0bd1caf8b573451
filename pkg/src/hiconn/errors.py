"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not compose for the requested operation."""


class ContractError(ValueError):
    """An operation was called outside its documented contract."""


class GraphValidationError(ValueError):
    """An adjacency matrix failed structural validation."""


class DataFormatError(ValueError):
    """A dataset file exists but does not conform to the expected format."""
