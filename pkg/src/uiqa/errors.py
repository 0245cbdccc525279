class DataError(ValueError):
    """Input data is malformed or violates a table invariant."""
