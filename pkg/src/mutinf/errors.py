class UsageError(ValueError):
    """Raised when an operation is called with arguments outside its contract."""


class DataError(ValueError):
    """Raised when observation data is missing something an operation needs."""


class OrderingError(RuntimeError):
    """Raised when an agent needs a peer configuration that has not been published yet."""


class CycleError(UsageError):
    """Raised when an integration would close a cycle in the observation graph."""
