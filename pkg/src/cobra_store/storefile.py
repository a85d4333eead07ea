"""On-disk store file: header, checksummed record frames, master records.

Layout (all integers little-endian)::

    header   "CPS1" u16 version=1 u16 flags=0 8*00              16 bytes
    frame    u32 stored_length | u8 record_type | u8 codec |
             u32 raw_length | payload[stored_length] | u32 crc   14 + payload

The CRC-32 covers record_type, codec, raw_length and the stored payload.
Record type 1 is an object, 2 a master. Codec 0 is raw, 1 raw deflate.

The visible state of a file is the table of contents carried by the last
master that a sequential scan from the header reaches intact. Anything
after it is an uncommitted interval and gets overwritten by the next
writer.
"""

from __future__ import annotations

import logging
import os
import struct
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import (
    AlreadyExists,
    BadLocator,
    ChecksumMismatch,
    CorruptPayload,
    IoFailure,
    MalformedEncoding,
    NotAStore,
    ReadOnlyStore,
    SequenceViolation,
)
from .lock import WriterLock
from .medium import FileMedium
from .values import Rec, decode_value, encode_value

logger = logging.getLogger(__name__)

MAGIC = b"CPS1"
VERSION = 1
HEADER_SIZE = 16
HEADER = MAGIC + struct.pack("<HH", VERSION, 0) + bytes(8)

REC_OBJECT = 1
REC_MASTER = 2
CODEC_RAW = 0
CODEC_DEFLATE = 1
DEFAULT_LEVEL = 1

_FRAME_HEAD = struct.Struct("<IBBI")
_CRC = struct.Struct("<I")
FRAME_HEAD_SIZE = _FRAME_HEAD.size  # 10
FRAME_OVERHEAD = FRAME_HEAD_SIZE + 4

MAX_U32 = 0xFFFFFFFF


class Locator(NamedTuple):
    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length


# --------------------------------------------------------------------------
# checksums and codecs


def crc32(data) -> int:
    """CRC-32 (reflected 0xEDB88320, init and final xor 0xFFFFFFFF)."""
    return zlib.crc32(data) & 0xFFFFFFFF


def check_level(level) -> int:
    if isinstance(level, bool) or not isinstance(level, int) or not 0 <= level <= 9:
        raise ValueError(f"compression level must be an int in 0..9, got {level!r}")
    return level


def compress_payload(data, level: int = DEFAULT_LEVEL) -> bytes:
    """Raw deflate (RFC 1951) at ``level``; level 0 returns the input unchanged."""
    check_level(level)
    if level == 0:
        return bytes(data)
    c = zlib.compressobj(level, zlib.DEFLATED, -15)
    return c.compress(data) + c.flush()


def decompress_payload(data, raw_length: int) -> bytes:
    d = zlib.decompressobj(-15)
    try:
        out = d.decompress(data, raw_length + 1)
    except zlib.error as exc:
        raise CorruptPayload(f"deflate stream invalid: {exc}") from None
    if len(out) != raw_length:
        raise CorruptPayload(f"inflated to {len(out)}+ bytes, expected {raw_length}")
    if not d.eof or d.unused_data or d.unconsumed_tail:
        raise CorruptPayload("deflate stream not terminated where expected")
    return out


# --------------------------------------------------------------------------
# frames


def build_frame(record_type: int, codec: int, raw_length: int, stored: bytes) -> bytes:
    if len(stored) > MAX_U32 or raw_length > MAX_U32:
        raise ValueError("payload larger than 4 GiB")
    head = _FRAME_HEAD.pack(len(stored), record_type, codec, raw_length)
    crc = zlib.crc32(stored, zlib.crc32(head[4:])) & 0xFFFFFFFF
    return head + stored + _CRC.pack(crc)


@dataclass
class Frame:
    offset: int
    length: int
    record_type: int
    codec: int
    raw_length: int
    stored: bytes

    @property
    def locator(self) -> Locator:
        return Locator(self.offset, self.length)

    def payload(self) -> bytes:
        if self.codec == CODEC_RAW:
            return self.stored
        return decompress_payload(self.stored, self.raw_length)


def _read_frame(medium, offset: int):
    """Parse the frame at ``offset``.

    Returns ``(frame, reason)``. ``reason`` is None for an intact frame,
    ``"truncated"`` when the bytes run out (frame is then None),
    ``"checksum"`` or ``"malformed"`` when the frame is complete but bad.
    """
    head = medium.read(offset, FRAME_HEAD_SIZE)
    if len(head) < FRAME_HEAD_SIZE:
        return None, "truncated"
    stored_length, record_type, codec, raw_length = _FRAME_HEAD.unpack(head)
    rest = medium.read(offset + FRAME_HEAD_SIZE, stored_length + 4)
    if len(rest) < stored_length + 4:
        return None, "truncated"
    stored = rest[:stored_length]
    frame = Frame(offset, FRAME_OVERHEAD + stored_length, record_type, codec, raw_length, stored)
    expected = _CRC.unpack_from(rest, stored_length)[0]
    if zlib.crc32(stored, zlib.crc32(head[4:])) & 0xFFFFFFFF != expected:
        return frame, "checksum"
    if record_type not in (REC_OBJECT, REC_MASTER) or codec not in (CODEC_RAW, CODEC_DEFLATE):
        return frame, "malformed"
    if codec == CODEC_RAW and stored_length != raw_length:
        return frame, "malformed"
    if record_type == REC_MASTER and codec != CODEC_RAW:
        return frame, "malformed"
    return frame, None


# --------------------------------------------------------------------------
# master records


@dataclass
class MasterRecord:
    seq: int
    toc: dict = field(default_factory=dict)  # container -> object -> Locator

    def to_value(self) -> Rec:
        toc = {
            cname: {oname: [loc.offset, loc.length] for oname, loc in objects.items()}
            for cname, objects in self.toc.items()
        }
        return Rec(seq=self.seq, toc=toc)

    def encode(self) -> bytes:
        return encode_value(self.to_value())

    @classmethod
    def from_value(cls, v) -> "MasterRecord":
        if not isinstance(v, Rec) or list(v) != ["seq", "toc"]:
            raise MalformedEncoding("master must be Rec{seq, toc}")
        seq, raw_toc = v["seq"], v["toc"]
        if isinstance(seq, bool) or not isinstance(seq, int) or seq < 1:
            raise MalformedEncoding(f"bad master seq {seq!r}")
        if not isinstance(raw_toc, dict) or isinstance(raw_toc, Rec):
            raise MalformedEncoding("master toc must be a Map")
        toc = {}
        for cname, objects in raw_toc.items():
            if not isinstance(objects, dict) or isinstance(objects, Rec):
                raise MalformedEncoding(f"toc entry for {cname!r} must be a Map")
            entries = {}
            for oname, loc in objects.items():
                if (not isinstance(loc, list) or len(loc) != 2
                        or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 0
                                   for x in loc)):
                    raise MalformedEncoding(f"bad locator for {cname}/{oname}")
                entries[oname] = Locator(loc[0], loc[1])
            toc[cname] = entries
        return cls(seq, toc)

    @classmethod
    def decode(cls, payload: bytes) -> "MasterRecord":
        return cls.from_value(decode_value(payload))


# --------------------------------------------------------------------------
# scanning


@dataclass
class RecoveryReport:
    master: Optional[Locator]  # last valid master frame, if any
    seq: int                   # its sequence number, 0 when there is none
    write_cursor: int
    orphan_bytes: int
    damaged: list = field(default_factory=list)  # [(offset, reason)]
    file_size: int = HEADER_SIZE


@dataclass
class _Scan:
    report: RecoveryReport
    toc: dict
    masters: int = 0
    object_frames: int = 0
    committed_object_frames: int = 0
    # payload totals for object frames up to the last valid master
    committed_raw: int = 0
    committed_stored: int = 0


def _check_header(head: bytes, path) -> None:
    if len(head) < HEADER_SIZE or head[:4] != MAGIC:
        raise NotAStore(f"{path}: bad magic")
    version, flags = struct.unpack_from("<HH", head, 4)
    if version != VERSION:
        raise NotAStore(f"{path}: unsupported version {version}")
    if flags != 0 or head[8:16] != bytes(8):
        raise NotAStore(f"{path}: nonzero flags or reserved bytes")


def _validate_master(master: MasterRecord, frame_starts) -> bool:
    for objects in master.toc.values():
        for loc in objects.values():
            if frame_starts.get(loc.offset) != loc.length:
                return False
    return True


def _scan(medium, *, keep_going: bool = False, deep: bool = False) -> _Scan:
    """Walk frames from the header.

    The default is the recovery walk: stop at the first bad frame. With
    ``keep_going`` (verification), step over complete-but-bad frames and
    continue; ``deep`` additionally inflates and decodes object payloads.
    """
    size = medium.size()
    report = RecoveryReport(None, 0, HEADER_SIZE, 0, [], size)
    state = _Scan(report, {})
    frame_starts: dict[int, int] = {}
    raw_total = stored_total = 0
    pos = HEADER_SIZE
    while pos < size:
        frame, reason = _read_frame(medium, pos)
        if reason is None and frame.record_type == REC_MASTER:
            try:
                master = MasterRecord.decode(frame.stored)
            except MalformedEncoding:
                reason = "malformed"
            else:
                if master.seq <= report.seq or not _validate_master(master, frame_starts):
                    reason = "malformed"
                else:
                    state.masters += 1
                    state.toc = master.toc
                    report.master = frame.locator
                    report.seq = master.seq
                    report.write_cursor = frame.offset + frame.length
                    state.committed_raw, state.committed_stored = raw_total, stored_total
                    state.committed_object_frames = state.object_frames
        elif reason is None:
            if deep:
                try:
                    _object_body(frame.payload())
                except (CorruptPayload, MalformedEncoding):
                    reason = "malformed"
            if reason is None:
                state.object_frames += 1
                frame_starts[frame.offset] = frame.length
                raw_total += frame.raw_length
                stored_total += len(frame.stored)
        if reason is not None:
            report.damaged.append((pos, reason))
            if not keep_going or frame is None:
                break
            # keep damaged frames addressable so one bad object does not taint its master
            frame_starts[frame.offset] = frame.length
        pos += frame.length
    report.orphan_bytes = size - report.write_cursor
    return state


def _object_body(payload: bytes):
    v = decode_value(payload)
    if (not isinstance(v, Rec) or list(v) != ["container", "name", "value"]
            or not isinstance(v["container"], str) or not isinstance(v["name"], str)):
        raise MalformedEncoding("object frame must hold Rec{container, name, value}")
    return v["container"], v["name"], v["value"]


def _open_medium(path, *, writable: bool):
    try:
        return FileMedium.open(path, writable=writable)
    except FileNotFoundError as exc:
        raise IoFailure(f"{path}: no such file") from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def _scan_path(path, **kwargs) -> _Scan:
    medium = _open_medium(path, writable=False)
    try:
        _check_header(medium.read(0, HEADER_SIZE), path)
        return _scan(medium, **kwargs)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    finally:
        medium.close()


def scan_recover(path) -> RecoveryReport:
    """Locate the last intact master of the file at ``path``."""
    return _scan_path(path).report


# --------------------------------------------------------------------------
# handles


class StoreHandle:
    """Open store file. Confined to one thread at a time."""

    def __init__(self, path, medium, *, writable: bool, lock=None, scan: _Scan):
        self.path = os.fspath(path)
        self.medium = medium
        self.writable = writable
        self.lock = lock
        self.report = scan.report
        self.toc = scan.toc
        self.seq = scan.report.seq
        self.cursor = scan.report.write_cursor
        self.masters = scan.masters
        self._tail_checked = not writable

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __repr__(self):
        mode = "rw" if self.writable else "r"
        return f"<StoreHandle {self.path!r} mode={mode} seq={self.seq}>"

    @property
    def closed(self) -> bool:
        return self.medium is None

    def close(self) -> None:
        if self.medium is not None:
            try:
                self.medium.close()
            finally:
                self.medium = None
                if self.lock is not None:
                    self.lock.release()

    def _require_writable(self):
        if self.medium is None:
            raise IoFailure(f"{self.path}: handle is closed")
        if not self.writable:
            raise ReadOnlyStore(f"{self.path} is open read-only")

    def _append(self, frame: bytes) -> Locator:
        try:
            if not self._tail_checked:
                # bytes past the cursor belong to an uncommitted interval
                if self.medium.size() > self.cursor:
                    logger.info("%s: discarding %d uncommitted bytes",
                                self.path, self.medium.size() - self.cursor)
                    self.medium.truncate(self.cursor)
                self._tail_checked = True
            loc = Locator(self.cursor, len(frame))
            self.medium.write(self.cursor, frame)
        except OSError as exc:
            raise IoFailure(f"{self.path}: write failed: {exc}") from exc
        self.cursor += len(frame)
        return loc

    def append_record(self, record_type: int, payload: bytes,
                      level: int = 0) -> Locator:
        """Append a frame at the write cursor; nothing is visible until a master commits."""
        self._require_writable()
        if record_type not in (REC_OBJECT, REC_MASTER):
            raise ValueError(f"unknown record type {record_type}")
        check_level(level)
        if record_type == REC_MASTER:
            level = 0
        payload = bytes(payload)
        codec = CODEC_RAW if level == 0 else CODEC_DEFLATE
        stored = compress_payload(payload, level)
        return self._append(build_frame(record_type, codec, len(payload), stored))

    def read_frame(self, loc: Locator) -> Frame:
        if self.medium is None:
            raise IoFailure(f"{self.path}: handle is closed")
        offset, length = loc
        if offset < HEADER_SIZE or length < FRAME_OVERHEAD:
            raise BadLocator(f"locator {tuple(loc)} outside frame area")
        try:
            frame, reason = _read_frame(self.medium, offset)
        except OSError as exc:
            raise IoFailure(f"{self.path}: read failed: {exc}") from exc
        if frame is None:
            raise BadLocator(f"locator {tuple(loc)} runs past end of file")
        if frame.length != length:
            raise BadLocator(f"locator {tuple(loc)} does not match frame of {frame.length} bytes")
        if reason == "checksum":
            raise ChecksumMismatch(f"frame at {offset}: checksum mismatch")
        if reason == "malformed":
            raise CorruptPayload(f"frame at {offset}: invalid header fields")
        return frame

    def read_record(self, loc: Locator) -> tuple[int, bytes]:
        frame = self.read_frame(loc)
        return frame.record_type, frame.payload()

    def read_object(self, loc: Locator):
        """Read an object frame and return ``(container, name, value)``."""
        record_type, payload = self.read_record(loc)
        if record_type != REC_OBJECT:
            raise CorruptPayload(f"frame at {loc[0]} is not an object")
        try:
            return _object_body(payload)
        except MalformedEncoding as exc:
            raise CorruptPayload(f"frame at {loc[0]}: {exc}") from exc

    def sync(self) -> None:
        self._require_writable()
        try:
            self.medium.sync()
        except OSError as exc:
            raise IoFailure(f"{self.path}: sync failed: {exc}") from exc

    def write_master(self, master: MasterRecord) -> Locator:
        """Append ``master`` uncompressed and sync; its TOC becomes the recovered state."""
        self._require_writable()
        if master.seq != self.seq + 1:
            raise SequenceViolation(f"master seq {master.seq} after {self.seq}")
        loc = self.append_record(REC_MASTER, master.encode())
        self.sync()
        self.seq = master.seq
        self.toc = master.toc
        self.masters += 1
        return loc


def create_store(path) -> StoreHandle:
    """Create a new store file holding only the header; returns a writable handle."""
    if os.path.lexists(path):
        raise AlreadyExists(f"{path} already exists")
    lock = WriterLock(path).acquire()
    try:
        try:
            medium = FileMedium.open(path, writable=True, create=True)
        except FileExistsError as exc:
            raise AlreadyExists(f"{path} already exists") from exc
        except OSError as exc:
            raise IoFailure(f"cannot create {path}: {exc}") from exc
        try:
            medium.write(0, HEADER)
            medium.sync()
            _sync_dir(path)
        except OSError as exc:
            medium.close()
            raise IoFailure(f"cannot initialise {path}: {exc}") from exc
    except BaseException:
        lock.release()
        raise
    report = RecoveryReport(None, 0, HEADER_SIZE, 0, [], HEADER_SIZE)
    return StoreHandle(path, medium, writable=True, lock=lock, scan=_Scan(report, {}))


def _sync_dir(path) -> None:
    try:
        fd = os.open(os.path.dirname(os.path.abspath(path)), os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def open_store(path, mode: str = "r") -> StoreHandle:
    """Open an existing store read-only (``"r"``) or as the single writer (``"rw"``)."""
    if mode not in ("r", "rw"):
        raise ValueError(f"mode must be 'r' or 'rw', got {mode!r}")
    writable = mode == "rw"
    medium = _open_medium(path, writable=writable)
    lock = None
    try:
        _check_header(medium.read(0, HEADER_SIZE), path)
        if writable:
            lock = WriterLock(path).acquire()
        scan = _scan(medium)
    except OSError as exc:
        medium.close()
        if lock is not None:
            lock.release()
        raise IoFailure(f"{path}: {exc}") from exc
    except BaseException:
        medium.close()
        if lock is not None:
            lock.release()
        raise
    if scan.report.damaged or scan.report.orphan_bytes:
        logger.info("%s: recovered seq %d, %d bytes past last master",
                    path, scan.report.seq, scan.report.orphan_bytes)
    return StoreHandle(path, medium, writable=writable, lock=lock, scan=scan)


# --------------------------------------------------------------------------
# inspection


@dataclass
class VerifyReport:
    masters: int
    object_frames: int     # intact object frames up to the last valid master
    damaged: list          # [(offset, reason)]
    uncommitted_bytes: int
    seq: int

    @property
    def clean(self) -> bool:
        return not self.damaged


def verify_store(path) -> VerifyReport:
    """Check every frame, stepping over damaged ones where their length is intact."""
    scan = _scan_path(path, keep_going=True, deep=True)
    r = scan.report
    return VerifyReport(scan.masters, scan.committed_object_frames, list(r.damaged),
                        r.orphan_bytes, r.seq)


@dataclass
class StoreStats:
    containers: int
    objects: int
    masters: int
    file_size: int
    raw_payload_bytes: int
    stored_payload_bytes: int

    @property
    def ratio(self) -> float:
        # 0/0 is reported as 1.0 so scripts never see an undefined ratio
        if self.raw_payload_bytes == 0:
            return 1.0
        return self.stored_payload_bytes / self.raw_payload_bytes


def store_stats(path) -> StoreStats:
    """Counts and payload totals for the committed part of the file."""
    scan = _scan_path(path)
    return StoreStats(
        containers=len(scan.toc),
        objects=sum(len(objs) for objs in scan.toc.values()),
        masters=scan.masters,
        file_size=scan.report.file_size,
        raw_payload_bytes=scan.committed_raw,
        stored_payload_bytes=scan.committed_stored,
    )
