"""Containers of named objects with a write-buffering session.

A session reads through three layers: values put in the current interval,
then values already loaded into its cache, then the committed table of
contents. Writes stay in memory until :meth:`Session.commit`.
"""

from __future__ import annotations

import itertools
import logging

from . import commit as _commit
from . import refs as _refs
from .errors import (
    ContainerExists,
    CorruptPayload,
    IoFailure,
    NameExists,
    NoSuchContainer,
    NotFound,
    ReadOnlyStore,
)
from .naming import check_name, is_system
from .storefile import DEFAULT_LEVEL, check_level, create_store, open_store
from .values import PersistentRef, encode_value

logger = logging.getLogger(__name__)

PUT_MODES = ("create", "upsert")


class Session:
    """Unit of work over one store file.

    Confined to one thread at a time. Use as a context manager, or call
    :meth:`close`; uncommitted writes are dropped on close.
    """

    def __init__(self, handle, *, level: int = DEFAULT_LEVEL, catalog=None,
                 store_name: str = ""):
        self.handle = handle
        self.level = level
        self.catalog = catalog
        self.store_name = store_name
        self._pending = {}              # (container, name) -> value
        self._pending_containers = set()
        self._dirty = set()             # (container, name)
        self._cache = {}                # (store, container, name) -> value
        self._uids = {}                 # (store, container, name) -> uid
        self._uid_counter = itertools.count(1)
        self._foreign = {}              # logical store name -> StoreHandle
        self._abandoned = False

    @classmethod
    def open(cls, path, mode: str = "rw", *, create: bool = False, **kwargs) -> "Session":
        handle = create_store(path) if create else open_store(path, mode)
        return cls(handle, **kwargs)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def level(self) -> int:
        return self._level

    @level.setter
    def level(self, value: int) -> None:
        self._level = check_level(value)

    @property
    def writable(self) -> bool:
        return self.handle.writable

    @property
    def seq(self) -> int:
        return self.handle.seq

    @property
    def dirty(self) -> frozenset:
        return frozenset(self._dirty)

    def close(self) -> None:
        if self._pending and not self._abandoned:
            logger.warning("closing session with %d uncommitted objects", len(self._pending))
        for h in self._foreign.values():
            h.close()
        self._foreign.clear()
        self.handle.close()

    def _check_alive(self):
        if self._abandoned:
            raise IoFailure("session was abandoned after a crash")
        if self.handle.closed:
            raise IoFailure("session is closed")

    def _require_writable(self):
        self._check_alive()
        if not self.handle.writable:
            raise ReadOnlyStore(f"{self.handle.path} is open read-only")

    def _uid(self, key) -> int:
        uid = self._uids.get(key)
        if uid is None:
            uid = self._uids[key] = next(self._uid_counter)
        return uid

    # ------------------------------------------------------------------
    # containers

    def has_container(self, name: str) -> bool:
        return name in self.handle.toc or name in self._pending_containers

    def create_container(self, name: str) -> str:
        self._require_writable()
        check_name(name, what="container name")
        if self.has_container(name):
            raise ContainerExists(name)
        self._pending_containers.add(name)
        return name

    def list_containers(self) -> list:
        names = set(self.handle.toc) | self._pending_containers
        # str order is code point order, which equals UTF-8 byte order
        return sorted(names)

    def list_objects(self, container: str, include_system: bool = False) -> list:
        self._check_alive()
        if not self.has_container(container):
            raise NoSuchContainer(container)
        names = set(self.handle.toc.get(container, ()))
        names.update(n for c, n in self._pending if c == container)
        if not include_system:
            names = {n for n in names if not is_system(n)}
        return sorted(names)

    # ------------------------------------------------------------------
    # objects

    def put_object(self, container: str, name: str, value, mode: str = "create",
                   *, _system: bool = False) -> PersistentRef:
        self._require_writable()
        if mode not in PUT_MODES:
            raise ValueError(f"mode must be one of {PUT_MODES}, got {mode!r}")
        check_name(name, what="object name", allow_reserved=_system)
        if not self.has_container(container):
            raise NoSuchContainer(container)
        key = (container, name)
        if mode == "create" and self._exists(key):
            raise NameExists(f"{container}/{name}")
        encode_value(value)  # reject invalid values now rather than mid-commit
        self._pending[key] = value
        self._dirty.add(key)
        return PersistentRef("", container, name)

    def _exists(self, key) -> bool:
        container, name = key
        return key in self._pending or name in self.handle.toc.get(container, ())

    def get_object(self, container: str, name: str):
        self._check_alive()
        key = (container, name)
        if key in self._pending:
            return self._pending[key]
        ckey = ("", container, name)
        if ckey in self._cache:
            return self._cache[ckey]
        return self._load(ckey, self.handle)

    def _load(self, ckey, handle):
        _, container, name = ckey
        loc = handle.toc.get(container, {}).get(name)
        if loc is None:
            raise NotFound(f"{container}/{name}")
        got_container, got_name, value = handle.read_object(loc)
        if (got_container, got_name) != (container, name):
            raise CorruptPayload(
                f"frame at {loc.offset} holds {got_container}/{got_name}, "
                f"expected {container}/{name}")
        self._cache[ckey] = value
        self._uid(ckey)
        return value

    def memory_uid(self, container: str, name: str) -> int:
        """Session-local identity of a committed object (loads it if needed)."""
        self.get_object(container, name)
        return self._uid(("", container, name))

    def mark_dirty(self, container: str, name: str) -> None:
        """Schedule an object for the next commit, e.g. after mutating it in place."""
        self._require_writable()
        key = (container, name)
        if key not in self._pending:
            ckey = ("", container, name)
            if ckey not in self._cache:
                raise NotFound(f"{container}/{name} is neither pending nor cached")
            self._pending[key] = self._cache[ckey]
        self._dirty.add(key)

    def commit(self):
        return _commit.commit(self)

    # ------------------------------------------------------------------
    # references and namespaces

    def deref(self, ref: PersistentRef):
        return _refs.deref(self, ref)

    def bind_name(self, scope: str, name: str, target: PersistentRef) -> None:
        _refs.bind_name(self, scope, name, target)

    def resolve_name(self, scope: str, name: str) -> PersistentRef:
        return _refs.resolve_name(self, scope, name)

    def names_of(self, scope: str, target: PersistentRef) -> list:
        return _refs.names_of(self, scope, target)

    def namespace(self, scope: str):
        """Copy of the NamespaceTable currently in effect for ``scope``."""
        return _refs.load_namespace(self, scope)
