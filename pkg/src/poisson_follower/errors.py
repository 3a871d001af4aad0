"""Exception types shared across the package."""


class FollowerError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FollowerError, ValueError):
    pass


class NotFound(FollowerError, KeyError):
    pass


class Unsupported(FollowerError, ValueError):
    pass


class InsufficientData(FollowerError, ValueError):
    pass
