class NumericalFailure(RuntimeError):
    """A computation ran but could not produce an admissible result."""
