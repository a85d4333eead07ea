"""Exception hierarchy shared by every layer of the store."""


class StoreError(Exception):
    """Base class for all cobra-store errors."""


# value model
class InvalidValue(StoreError, ValueError):
    pass


class MalformedEncoding(StoreError, ValueError):
    pass


# store file
class IoFailure(StoreError):
    pass


class AlreadyExists(StoreError):
    pass


class NotAStore(StoreError):
    pass


class LockHeld(StoreError):
    pass


class ReadOnlyStore(StoreError):
    pass


class ChecksumMismatch(StoreError):
    pass


class CorruptPayload(StoreError):
    pass


class BadLocator(StoreError):
    pass


class SequenceViolation(StoreError):
    pass


# objects, containers, names
class InvalidName(StoreError, ValueError):
    pass


class ContainerExists(StoreError):
    pass


class NoSuchContainer(StoreError, LookupError):
    pass


class NameExists(StoreError):
    pass


class NotFound(StoreError, LookupError):
    pass


# catalog
class UnknownStore(StoreError, LookupError):
    pass


class DuplicateLogical(StoreError):
    pass


class ParseError(StoreError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
