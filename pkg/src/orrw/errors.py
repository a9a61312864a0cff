class DomainError(ValueError):
    """A parameter combination outside an operation's mathematical domain."""
