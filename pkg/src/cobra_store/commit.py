"""Commit protocol: object frames first, sync, master last, sync again.

A crash anywhere before the master frame is complete leaves the previous
master as the last intact one, so the whole interval is simply absent on
the next open. Only the master write itself is exposed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import IoFailure
from .medium import CrashingMedium, SimulatedCrash
from .storefile import REC_OBJECT, MasterRecord
from .values import Rec, encode_value


@dataclass(frozen=True)
class CommitResult:
    seq: int
    objects_written: int
    bytes_written: int


@dataclass(frozen=True)
class CrashInjection:
    """Where :func:`commit_with_crash` stops the write stream.

    ``kind``: ``after-n-bytes`` (``arg`` bytes reach the medium),
    ``before-master``, ``mid-master`` (``arg`` bytes of the master frame
    reach the medium) or ``after-master-before-sync``.
    ``lose_unsynced`` drops unsynced bytes at the crash instead of
    modelling a write-through medium.
    """

    kind: str
    arg: int = 0
    lose_unsynced: bool = False


@dataclass
class CrashOutcome:
    crashed: bool
    injection: CrashInjection
    result: Optional[CommitResult]
    file_size: int


def commit(session) -> CommitResult:
    s = session
    s._require_writable()
    h = s.handle
    if not s._dirty and not s._pending_containers:
        return CommitResult(h.seq, 0, 0)

    start = h.cursor
    # tuple order on str is code point order == UTF-8 byte order
    keys = sorted(s._dirty)
    try:
        new_locs = {}
        for container, name in keys:
            value = s._pending[(container, name)]
            payload = encode_value(Rec(container=container, name=name, value=value))
            new_locs[(container, name)] = h.append_record(REC_OBJECT, payload, level=s.level)
        h.sync()

        toc = {c: dict(objects) for c, objects in h.toc.items()}
        for container in s._pending_containers:
            toc.setdefault(container, {})
        for (container, name), loc in new_locs.items():
            toc.setdefault(container, {})[name] = loc
        h.write_master(MasterRecord(h.seq + 1, toc))
    except IoFailure:
        # rewind so a retry overwrites whatever part of the interval reached the file
        h.cursor = start
        h._tail_checked = False
        raise

    for key in keys:
        ckey = ("",) + key
        s._cache[ckey] = s._pending[key]
        s._uid(ckey)
    s._pending.clear()
    s._dirty.clear()
    s._pending_containers.clear()
    return CommitResult(h.seq, len(keys), h.cursor - start)


def commit_with_crash(session, injection: CrashInjection) -> CrashOutcome:
    """Run :func:`commit` but abandon the session at the injection point.

    Test-only. After a crash the session is dead: no further writes or
    syncs reach the file, and the writer lock is released as if the
    owning process had exited.
    """
    s = session
    s._require_writable()
    h = s.handle
    inner = h.medium
    wrapper = CrashingMedium(inner, injection.kind, injection.arg,
                             lose_unsynced=injection.lose_unsynced)
    h.medium = wrapper
    try:
        result = commit(s)
    except SimulatedCrash:
        size = inner.size()
        s._abandoned = True
        s.close()
        return CrashOutcome(True, injection, None, size)
    finally:
        if h.medium is wrapper:
            h.medium = inner
    return CrashOutcome(False, injection, result, inner.size())
