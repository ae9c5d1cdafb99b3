class OclepError(Exception):
    exit_code = 1


class UsageError(OclepError, ValueError):
    """Bad arguments or calling an operation outside its preconditions."""

    exit_code = 1


class DataError(OclepError):
    """Malformed, missing or unreadable input data."""

    exit_code = 2
