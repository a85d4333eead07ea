"""Persistent references and bidirectional namespaces.

A reference is the name triple (store, container, object); the session
cache gives it an in-memory identity. A namespace maps names to refs in
one scope and refs back to every name they carry there. Container scopes
persist their table as the system object ``__namespace__``; object scopes
keep it inside the object's own Rec under the ``__ns`` field.
"""

from __future__ import annotations

import bisect

from .errors import (
    InvalidName,
    InvalidValue,
    MalformedEncoding,
    NameExists,
    NoSuchContainer,
    NotFound,
    UnknownStore,
)
from .naming import NAMESPACE_FIELD, NAMESPACE_OBJECT, check_name
from .storefile import open_store
from .values import PersistentRef, Rec

__all__ = [
    "NamespaceTable",
    "PersistentRef",
    "bind_name",
    "deref",
    "make_ref",
    "names_of",
    "resolve_name",
]


def make_ref(store: str, container: str, obj: str) -> PersistentRef:
    if store != "":
        check_name(store, what="store name", allow_reserved=True, allow_pipe=False)
    check_name(container, what="container name", allow_reserved=True, allow_pipe=False)
    check_name(obj, what="object name", allow_reserved=True, allow_pipe=False)
    return PersistentRef(store, container, obj)


class NamespaceTable:
    """Names unique per scope on the forward side; one target may carry many names."""

    def __init__(self):
        self.forward: dict[str, PersistentRef] = {}
        self.reverse: dict[str, list[str]] = {}

    def __eq__(self, other):
        if not isinstance(other, NamespaceTable):
            return NotImplemented
        return self.forward == other.forward and self.reverse == other.reverse

    def __len__(self):
        return len(self.forward)

    def __repr__(self):
        return f"NamespaceTable({len(self.forward)} names)"

    def bind(self, name: str, target: PersistentRef) -> None:
        check_name(name, what="namespace name")
        if not isinstance(target, PersistentRef):
            raise TypeError(f"target must be a PersistentRef, got {type(target).__name__}")
        if not target.container or not target.object:
            raise InvalidName(f"unresolvable target {target.canonical!r}")
        if name in self.forward:
            raise NameExists(f"{name!r} already bound to {self.forward[name].canonical}")
        self.forward[name] = target
        bisect.insort(self.reverse.setdefault(target.canonical, []), name)

    def resolve(self, name: str) -> PersistentRef:
        try:
            return self.forward[name]
        except KeyError:
            raise NotFound(f"name {name!r} is not bound") from None

    def names_of(self, target: PersistentRef) -> list:
        return list(self.reverse.get(target.canonical, ()))

    def is_consistent(self) -> bool:
        derived: dict[str, list[str]] = {}
        for name in sorted(self.forward):
            derived.setdefault(self.forward[name].canonical, []).append(name)
        return derived == self.reverse

    def to_value(self) -> Rec:
        return Rec(forward=dict(self.forward),
                   reverse={k: list(v) for k, v in self.reverse.items()})

    @classmethod
    def from_value(cls, v) -> "NamespaceTable":
        if (not isinstance(v, Rec) or list(v) != ["forward", "reverse"]
                or not isinstance(v["forward"], dict) or not isinstance(v["reverse"], dict)):
            raise MalformedEncoding("namespace must be Rec{forward: Map, reverse: Map}")
        table = cls()
        for name, target in v["forward"].items():
            if not isinstance(target, PersistentRef):
                raise MalformedEncoding(f"namespace entry {name!r} is not a ref")
            table.forward[name] = target
        for key, names in v["reverse"].items():
            if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
                raise MalformedEncoding(f"reverse entry {key!r} is not a list of names")
            table.reverse[key] = list(names)
        if not table.is_consistent():
            raise MalformedEncoding("namespace forward and reverse maps disagree")
        return table


# --------------------------------------------------------------------------
# session-level operations


def _parse_scope(session, scope: str):
    container, sep, obj = scope.partition("/")
    if not session.has_container(container):
        raise NoSuchContainer(container)
    if not sep:
        return container, None
    check_name(obj, what="object name")
    return container, obj


def load_namespace(session, scope: str) -> NamespaceTable:
    container, obj = _parse_scope(session, scope)
    if obj is None:
        try:
            stored = session.get_object(container, NAMESPACE_OBJECT)
        except NotFound:
            return NamespaceTable()
        return NamespaceTable.from_value(stored)
    value = session.get_object(container, obj)
    if isinstance(value, Rec) and NAMESPACE_FIELD in value:
        return NamespaceTable.from_value(value[NAMESPACE_FIELD])
    return NamespaceTable()


def bind_name(session, scope: str, name: str, target: PersistentRef) -> None:
    session._require_writable()
    container, obj = _parse_scope(session, scope)
    if obj is not None:
        value = session.get_object(container, obj)
        if not isinstance(value, Rec):
            raise InvalidValue(f"{scope} must hold a Rec to carry a namespace")
    table = load_namespace(session, scope)
    table.bind(name, target)
    if obj is None:
        session.put_object(container, NAMESPACE_OBJECT, table.to_value(), "upsert", _system=True)
    else:
        value[NAMESPACE_FIELD] = table.to_value()
        session.put_object(container, obj, value, "upsert")


def resolve_name(session, scope: str, name: str) -> PersistentRef:
    return load_namespace(session, scope).resolve(name)


def names_of(session, scope: str, target: PersistentRef) -> list:
    return load_namespace(session, scope).names_of(target)


def deref(session, ref: PersistentRef):
    """Return ``(value, memory_uid)`` for ``ref``.

    Refs with an empty store name (or the session's own logical name)
    resolve in the session's store, honouring uncommitted writes. Other
    store names go through the session catalog and are opened read-only.
    """
    if not isinstance(ref, PersistentRef):
        raise TypeError(f"expected PersistentRef, got {type(ref).__name__}")
    session._check_alive()
    if ref.store == "" or ref.store == session.store_name:
        value = session.get_object(ref.container, ref.object)
        return value, session._uid(("", ref.container, ref.object))
    ckey = (ref.store, ref.container, ref.object)
    if ckey in session._cache:
        return session._cache[ckey], session._uid(ckey)
    handle = session._foreign.get(ref.store)
    if handle is None:
        if session.catalog is None:
            raise UnknownStore(f"no catalog to resolve store {ref.store!r}")
        handle = open_store(session.catalog.lookup(ref.store), "r")
        session._foreign[ref.store] = handle
    value = session._load(ckey, handle)
    return value, session._uid(ckey)
