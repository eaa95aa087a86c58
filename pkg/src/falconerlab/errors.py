class ResourceCapError(RuntimeError):
    """A computation would exceed a configured size cap."""
