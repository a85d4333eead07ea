"""Byte media a store handle writes through.

``FileMedium`` is the real thing. ``CrashingMedium`` wraps another medium
and abandons the write stream at a chosen point, leaving the inner medium
exactly as a crashed process would.
"""

from __future__ import annotations

import os


class SimulatedCrash(Exception):
    """Raised by CrashingMedium when its trigger fires."""


class FileMedium:
    def __init__(self, path, fd: int):
        self.path = path
        self._fd = fd

    @classmethod
    def open(cls, path, *, writable: bool, create: bool = False) -> "FileMedium":
        if create:
            flags = os.O_RDWR | os.O_CREAT | os.O_EXCL
        else:
            flags = os.O_RDWR if writable else os.O_RDONLY
        fd = os.open(path, flags | getattr(os, "O_BINARY", 0), 0o644)
        return cls(path, fd)

    def size(self) -> int:
        return os.fstat(self._fd).st_size

    def read(self, offset: int, n: int) -> bytes:
        chunks = []
        while n > 0:
            chunk = os.pread(self._fd, n, offset)
            if not chunk:
                break
            chunks.append(chunk)
            offset += len(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    def write(self, offset: int, data: bytes) -> None:
        view = memoryview(data)
        while view:
            written = os.pwrite(self._fd, view, offset)
            offset += written
            view = view[written:]

    def sync(self) -> None:
        os.fsync(self._fd)

    def truncate(self, size: int) -> None:
        os.ftruncate(self._fd, size)

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    @property
    def closed(self) -> bool:
        return self._fd < 0


class CrashingMedium:
    """Medium wrapper that simulates a process crash mid-stream.

    Every store write is exactly one record frame, so the wrapper can tell
    master frames (record type byte 2 at offset 4) from object frames.

    ``kind`` is one of ``after-n-bytes`` (``arg`` = bytes allowed through),
    ``before-master``, ``mid-master`` (``arg`` = bytes of the master frame
    that reach the medium) or ``after-master-before-sync``.

    With ``lose_unsynced`` the medium models a volatile cache: on crash
    everything written after the last completed sync is dropped. Otherwise
    the medium is write-through and keeps every byte handed to it.
    """

    def __init__(self, inner, kind: str, arg: int = 0, *, lose_unsynced: bool = False):
        if kind not in ("after-n-bytes", "before-master", "mid-master",
                        "after-master-before-sync"):
            raise ValueError(f"unknown crash trigger {kind!r}")
        self.inner = inner
        self.kind = kind
        self.arg = arg
        self.lose_unsynced = lose_unsynced
        self.synced_size = inner.size()
        self.written = 0
        self.fired = False
        self._master_written = False

    def _crash(self):
        self.fired = True
        if self.lose_unsynced:
            self.inner.truncate(self.synced_size)
        raise SimulatedCrash(self.kind)

    def size(self) -> int:
        return self.inner.size()

    def read(self, offset: int, n: int) -> bytes:
        return self.inner.read(offset, n)

    def write(self, offset: int, data: bytes) -> None:
        if self.fired:
            raise SimulatedCrash("medium already crashed")
        is_master = len(data) > 4 and data[4] == 2
        if self.kind == "after-n-bytes":
            room = self.arg - self.written
            if len(data) > room:
                if room > 0:
                    self.inner.write(offset, data[:room])
                self.written += max(room, 0)
                self._crash()
        elif self.kind == "before-master" and is_master:
            self._crash()
        elif self.kind == "mid-master" and is_master:
            self.inner.write(offset, data[:self.arg])
            self._crash()
        self.inner.write(offset, data)
        self.written += len(data)
        if is_master:
            self._master_written = True

    def sync(self) -> None:
        if self.fired:
            raise SimulatedCrash("medium already crashed")
        if self.kind == "after-master-before-sync" and self._master_written:
            self._crash()
        self.inner.sync()
        self.synced_size = self.inner.size()

    def truncate(self, size: int) -> None:
        self.inner.truncate(size)
        self.synced_size = min(self.synced_size, size)

    def close(self) -> None:
        self.inner.close()

    @property
    def closed(self) -> bool:
        return self.inner.closed
