"""Typed value universe with a canonical binary encoding and text rendering.

Python representation of each value kind:

    Null   None            Str    str
    Bool   bool            Bytes  bytes (bytearray accepted on encode)
    Int    int (int64)     Seq    list (tuple accepted on encode)
    Float  float           Rec    Rec (ordered, insertion order kept)
    Map    dict[str, ...]  Ref    PersistentRef

Binary layout (little-endian, u32 lengths and counts)::

    00                      null
    01 b                    bool, b in {00, 01}
    02 i64                  int
    03 f64                  float
    04 len utf8             str
    05 count value*         seq
    06 count (name value)*  rec, names bare strings, insertion order
    07 store cont obj       ref, three bare strings
    08 len octets           bytes
    09 count (key value)*   map, keys bare strings in ascending byte order
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass

from .errors import InvalidValue, MalformedEncoding

__all__ = [
    "MAX_DEPTH",
    "PersistentRef",
    "Rec",
    "canonical_text",
    "decode_value",
    "encode_value",
    "value_equal",
]

MAX_DEPTH = 256

T_NULL = 0x00
T_BOOL = 0x01
T_INT = 0x02
T_FLOAT = 0x03
T_STR = 0x04
T_SEQ = 0x05
T_REC = 0x06
T_REF = 0x07
T_BYTES = 0x08
T_MAP = 0x09

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1

_U32 = struct.Struct("<I")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")


@dataclass(frozen=True)
class PersistentRef:
    """Name triple locating an object: (store, container, object).

    An empty ``store`` means "the store holding the referrer".
    """

    store: str
    container: str
    object: str

    @property
    def canonical(self) -> str:
        return f"{self.store}|{self.container}|{self.object}"

    def __str__(self) -> str:
        return self.canonical


class Rec(dict):
    """Ordered record of named fields.

    Unlike a plain ``dict`` (which is a Map), equality is order-sensitive
    and a Rec never equals a Map holding the same pairs.
    """

    __slots__ = ()

    def __eq__(self, other):
        if not isinstance(other, Rec):
            return NotImplemented if not isinstance(other, dict) else False
        return list(self.items()) == list(other.items())

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = None

    def __repr__(self) -> str:
        return f"Rec({dict.__repr__(self)})"

    def copy(self) -> "Rec":
        return Rec(self)


# --------------------------------------------------------------------------
# encoding


def _utf8(text, what) -> bytes:
    if not isinstance(text, str):
        raise InvalidValue(f"{what} must be str, got {type(text).__name__}")
    try:
        return text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InvalidValue(f"{what} is not valid UTF-8: {exc}") from None


def _bare(out: bytearray, text, what) -> None:
    raw = _utf8(text, what)
    out += _U32.pack(len(raw))
    out += raw


def _encode(v, out: bytearray, depth: int) -> None:
    if depth > MAX_DEPTH:
        raise InvalidValue(f"nesting deeper than {MAX_DEPTH}")
    if v is None:
        out.append(T_NULL)
    elif v is True or v is False:
        out.append(T_BOOL)
        out.append(1 if v else 0)
    elif isinstance(v, int):
        if not INT64_MIN <= v <= INT64_MAX:
            raise InvalidValue(f"integer {v} outside signed 64-bit range")
        out.append(T_INT)
        out += _I64.pack(v)
    elif isinstance(v, float):
        out.append(T_FLOAT)
        out += _F64.pack(v)
    elif isinstance(v, str):
        out.append(T_STR)
        _bare(out, v, "string")
    elif isinstance(v, (bytes, bytearray, memoryview)):
        raw = bytes(v)
        out.append(T_BYTES)
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(v, (list, tuple)):
        out.append(T_SEQ)
        out += _U32.pack(len(v))
        for item in v:
            _encode(item, out, depth + 1)
    elif isinstance(v, Rec):
        out.append(T_REC)
        out += _U32.pack(len(v))
        for name, item in v.items():
            if not isinstance(name, str) or not name:
                raise InvalidValue(f"record field name must be a non-empty str: {name!r}")
            _bare(out, name, "field name")
            _encode(item, out, depth + 1)
    elif isinstance(v, dict):
        keyed = []
        for key, item in v.items():
            keyed.append((_utf8(key, "map key"), item))
        keyed.sort(key=lambda pair: pair[0])
        out.append(T_MAP)
        out += _U32.pack(len(keyed))
        for raw, item in keyed:
            out += _U32.pack(len(raw))
            out += raw
            _encode(item, out, depth + 1)
    elif isinstance(v, PersistentRef):
        out.append(T_REF)
        _bare(out, v.store, "ref store")
        _bare(out, v.container, "ref container")
        _bare(out, v.object, "ref object")
    else:
        raise InvalidValue(f"unsupported value type {type(v).__name__}")


def encode_value(v) -> bytes:
    """Encode ``v`` to its canonical bytes; same value, same bytes."""
    out = bytearray()
    _encode(v, out, 1)
    return bytes(out)


# --------------------------------------------------------------------------
# decoding


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise MalformedEncoding(f"truncated at offset {self.pos}: need {n} bytes")
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def count(self, min_item: int) -> int:
        n = self.u32()
        # each item needs at least min_item bytes; reject absurd counts early
        if n * min_item > len(self.buf) - self.pos:
            raise MalformedEncoding(f"count {n} exceeds remaining input")
        return n

    def text(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedEncoding("invalid UTF-8") from None


def _decode(r: _Reader, depth: int):
    if depth > MAX_DEPTH:
        raise MalformedEncoding(f"nesting deeper than {MAX_DEPTH}")
    tag = r.take(1)[0]
    if tag == T_NULL:
        return None
    if tag == T_BOOL:
        b = r.take(1)[0]
        if b > 1:
            raise MalformedEncoding(f"bool byte {b:#04x}")
        return b == 1
    if tag == T_INT:
        return _I64.unpack(r.take(8))[0]
    if tag == T_FLOAT:
        return _F64.unpack(r.take(8))[0]
    if tag == T_STR:
        return r.text()
    if tag == T_BYTES:
        return r.take(r.u32())
    if tag == T_SEQ:
        return [_decode(r, depth + 1) for _ in range(r.count(1))]
    if tag == T_REC:
        rec = Rec()
        for _ in range(r.count(5)):
            name = r.text()
            if not name:
                raise MalformedEncoding("empty record field name")
            if name in rec:
                raise MalformedEncoding(f"duplicate record field {name!r}")
            rec[name] = _decode(r, depth + 1)
        return rec
    if tag == T_MAP:
        result = {}
        prev = None
        for _ in range(r.count(5)):
            start = r.pos
            key = r.text()
            raw = r.buf[start + 4:r.pos]
            if prev is not None and raw <= prev:
                raise MalformedEncoding(f"map key {key!r} out of order or duplicated")
            prev = raw
            result[key] = _decode(r, depth + 1)
        return result
    if tag == T_REF:
        return PersistentRef(r.text(), r.text(), r.text())
    raise MalformedEncoding(f"unknown tag {tag:#04x} at offset {r.pos - 1}")


def decode_value(b) -> object:
    """Decode exactly one value from ``b``; every byte must be consumed."""
    r = _Reader(bytes(b))
    try:
        v = _decode(r, 1)
    except RecursionError:
        raise MalformedEncoding("nesting too deep") from None
    if r.pos != len(r.buf):
        raise MalformedEncoding(f"{len(r.buf) - r.pos} trailing bytes")
    return v


# --------------------------------------------------------------------------
# strict equality


def value_equal(a, b) -> bool:
    """Structural equality that keeps value kinds apart.

    Python's ``==`` treats ``True == 1 == 1.0`` and ignores record order;
    this comparison does neither, and compares floats bit for bit so that
    NaN and -0.0 round trips are checked exactly.
    """
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, int) or isinstance(b, int):
        return isinstance(a, int) and isinstance(b, int) and a == b
    if isinstance(a, float) or isinstance(b, float):
        return (isinstance(a, float) and isinstance(b, float)
                and _F64.pack(a) == _F64.pack(b))
    if isinstance(a, str) or isinstance(b, str):
        return isinstance(a, str) and isinstance(b, str) and a == b
    if isinstance(a, (bytes, bytearray)) or isinstance(b, (bytes, bytearray)):
        return (isinstance(a, (bytes, bytearray)) and isinstance(b, (bytes, bytearray))
                and bytes(a) == bytes(b))
    if isinstance(a, (list, tuple)) or isinstance(b, (list, tuple)):
        if not (isinstance(a, (list, tuple)) and isinstance(b, (list, tuple))):
            return False
        return len(a) == len(b) and all(value_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, Rec) or isinstance(b, Rec):
        if not (isinstance(a, Rec) and isinstance(b, Rec)) or list(a) != list(b):
            return False
        return all(value_equal(a[k], b[k]) for k in a)
    if isinstance(a, dict) or isinstance(b, dict):
        if not (isinstance(a, dict) and isinstance(b, dict)) or a.keys() != b.keys():
            return False
        return all(value_equal(a[k], b[k]) for k in a)
    if isinstance(a, PersistentRef) or isinstance(b, PersistentRef):
        return a == b
    return False


# --------------------------------------------------------------------------
# text rendering

_BARE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_ESCAPES = str.maketrans({'"': '\\"', "\\": "\\\\", "\n": "\\n", "\t": "\\t"})


def _quote(s: str) -> str:
    return '"' + s.translate(_ESCAPES) + '"'


def _float_text(f: float) -> str:
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    # repr is the shortest round-trip form and already keeps ".0" on integral values
    return repr(f)


def _text(v, parts: list) -> None:
    if v is None:
        parts.append("null")
    elif v is True:
        parts.append("true")
    elif v is False:
        parts.append("false")
    elif isinstance(v, int):
        parts.append(str(v))
    elif isinstance(v, float):
        parts.append(_float_text(v))
    elif isinstance(v, str):
        parts.append(_quote(v))
    elif isinstance(v, (bytes, bytearray, memoryview)):
        parts.append(f"bytes({bytes(v).hex()})")
    elif isinstance(v, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(v):
            if i:
                parts.append(", ")
            _text(item, parts)
        parts.append("]")
    elif isinstance(v, Rec):
        parts.append("{")
        for i, (name, item) in enumerate(v.items()):
            if i:
                parts.append(", ")
            # names outside the identifier charset are quoted to stay unambiguous
            parts.append(name if _BARE_NAME.match(name) else _quote(name))
            parts.append(": ")
            _text(item, parts)
        parts.append("}")
    elif isinstance(v, dict):
        parts.append("map{")
        for i, key in enumerate(sorted(v, key=lambda k: k.encode("utf-8"))):
            if i:
                parts.append(", ")
            parts.append(_quote(key))
            parts.append(": ")
            _text(v[key], parts)
        parts.append("}")
    elif isinstance(v, PersistentRef):
        parts.append(f"ref({_quote(v.store)}, {_quote(v.container)}, {_quote(v.object)})")
    else:
        raise InvalidValue(f"unsupported value type {type(v).__name__}")


def canonical_text(v) -> str:
    parts: list[str] = []
    _text(v, parts)
    return "".join(parts)
