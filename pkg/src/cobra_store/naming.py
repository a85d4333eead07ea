"""Name rules for containers, objects, refs and catalog entries."""

from .errors import InvalidName

MAX_NAME_BYTES = 255
SYSTEM_PREFIX = "__"
NAMESPACE_OBJECT = "__namespace__"
NAMESPACE_FIELD = "__ns"


def check_name(name, *, what="name", allow_reserved=False, allow_pipe=True) -> str:
    """Validate ``name`` and return it unchanged.

    Names are non-empty UTF-8 of at most 255 bytes with no ``/`` and no
    control characters. The ``__`` prefix is reserved for system objects.
    """
    if not isinstance(name, str) or not name:
        raise InvalidName(f"{what} must be a non-empty string: {name!r}")
    try:
        size = len(name.encode("utf-8"))
    except UnicodeEncodeError:
        raise InvalidName(f"{what} is not valid UTF-8: {name!r}") from None
    if size > MAX_NAME_BYTES:
        raise InvalidName(f"{what} is {size} bytes, limit is {MAX_NAME_BYTES}")
    if "/" in name:
        raise InvalidName(f"{what} may not contain '/': {name!r}")
    if any(ord(ch) < 0x20 or 0x7F <= ord(ch) < 0xA0 for ch in name):
        raise InvalidName(f"{what} may not contain control characters: {name!r}")
    if not allow_pipe and "|" in name:
        raise InvalidName(f"{what} may not contain '|': {name!r}")
    if not allow_reserved and name.startswith(SYSTEM_PREFIX):
        raise InvalidName(f"{what} {name!r} uses the reserved '__' prefix")
    return name


def is_system(name: str) -> bool:
    return name.startswith(SYSTEM_PREFIX)
