"""Presence-based advisory writer lock: ``<store>.lock`` holding the writer's pid."""

from __future__ import annotations

import errno
import os

from .errors import IoFailure, LockHeld


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    except OSError as exc:
        return exc.errno != errno.ESRCH
    return True


class WriterLock:
    def __init__(self, store_path):
        self.path = os.fspath(store_path) + ".lock"
        self.held = False

    def read_owner(self):
        try:
            with open(self.path, encoding="ascii") as fh:
                return int(fh.read().strip())
        except (OSError, ValueError):
            return None

    def acquire(self) -> "WriterLock":
        # a lock whose owner process is gone is stale and may be broken once
        for attempt in (0, 1):
            try:
                fd = os.open(self.path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
            except FileExistsError:
                owner = self.read_owner()
                if attempt == 0 and owner is not None and not _pid_alive(owner):
                    try:
                        os.unlink(self.path)
                    except FileNotFoundError:
                        pass
                    continue
                raise LockHeld(f"{self.path} is held by pid {owner}") from None
            except OSError as exc:
                raise IoFailure(f"cannot create lock {self.path}: {exc}") from exc
            try:
                os.write(fd, str(os.getpid()).encode("ascii"))
            finally:
                os.close(fd)
            self.held = True
            return self
        raise LockHeld(self.path)  # pragma: no cover

    def release(self) -> None:
        if self.held:
            self.held = False
            try:
                os.unlink(self.path)
            except FileNotFoundError:
                pass

    def __enter__(self):
        return self.acquire()

    def __exit__(self, *exc):
        self.release()
