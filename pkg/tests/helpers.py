"""Independent oracles and fixture builders shared by the test modules.

Nothing here imports the encoder or checksum under test: the CRC is a
bit-at-a-time implementation and the value encoder is a separate
hand-written one, so they can check the production paths.
"""

import math
import os
import random
import struct

from cobra_store import PersistentRef, Rec, Session


def crc32_bitwise(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


def oracle_encode(v) -> bytes:
    """Second, deliberately naive encoder following the tag grammar."""
    def bare(s):
        b = s.encode("utf-8")
        return struct.pack("<I", len(b)) + b

    if v is None:
        return b"\x00"
    if isinstance(v, bool):
        return b"\x01" + (b"\x01" if v else b"\x00")
    if isinstance(v, int):
        return b"\x02" + struct.pack("<q", v)
    if isinstance(v, float):
        return b"\x03" + struct.pack("<d", v)
    if isinstance(v, str):
        return b"\x04" + bare(v)
    if isinstance(v, bytes):
        return b"\x08" + struct.pack("<I", len(v)) + v
    if isinstance(v, list):
        return b"\x05" + struct.pack("<I", len(v)) + b"".join(oracle_encode(x) for x in v)
    if isinstance(v, Rec):
        return b"\x06" + struct.pack("<I", len(v)) + b"".join(
            bare(k) + oracle_encode(x) for k, x in v.items())
    if isinstance(v, dict):
        keys = sorted(v, key=lambda k: k.encode("utf-8"))
        return b"\x09" + struct.pack("<I", len(v)) + b"".join(
            bare(k) + oracle_encode(v[k]) for k in keys)
    if isinstance(v, PersistentRef):
        return b"\x07" + bare(v.store) + bare(v.container) + bare(v.object)
    raise TypeError(v)


# --------------------------------------------------------------------------
# random values

_ALPHABET = "abcxyz_09 é€\U0001F600\n\t\"\\"


def _rand_text(rng, max_len=8):
    return "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(0, max_len)))


def _rand_float(rng):
    pick = rng.random()
    if pick < 0.05:
        return rng.choice([0.0, -0.0, math.inf, -math.inf, math.nan, 5e-324, 1e308])
    if pick < 0.3:
        return float(rng.randint(-1000, 1000))
    return struct.unpack("<d", struct.pack("<Q", rng.getrandbits(64)))[0]


def random_value(rng: random.Random, depth: int = 6):
    """Random value covering every tag, nested at most ``depth`` levels."""
    leaf_kinds = ["null", "bool", "int", "float", "str", "bytes", "ref"]
    kinds = leaf_kinds + (["seq", "rec", "map"] * 2 if depth > 1 else [])
    kind = rng.choice(kinds)
    if kind == "null":
        return None
    if kind == "bool":
        return rng.random() < 0.5
    if kind == "int":
        return rng.choice([0, -1, 1, -(1 << 63), (1 << 63) - 1, rng.getrandbits(63) - (1 << 62)])
    if kind == "float":
        return _rand_float(rng)
    if kind == "str":
        return _rand_text(rng)
    if kind == "bytes":
        return bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 10)))
    if kind == "ref":
        return PersistentRef(_rand_text(rng, 3), _rand_text(rng, 4), _rand_text(rng, 4))
    n = rng.randint(0, 4)
    if kind == "seq":
        return [random_value(rng, depth - 1) for _ in range(n)]
    if kind == "rec":
        rec = Rec()
        for _ in range(n):
            name = _rand_text(rng, 5) or "f"
            rec[name] = random_value(rng, depth - 1)
        return rec
    return {_rand_text(rng, 5): random_value(rng, depth - 1) for _ in range(n)}


def depth_of(v) -> int:
    if isinstance(v, (list, tuple)):
        return 1 + max((depth_of(x) for x in v), default=0)
    if isinstance(v, dict):
        return 1 + max((depth_of(x) for x in v.values()), default=0)
    return 1


def tag_set(v, acc=None) -> set:
    acc = set() if acc is None else acc
    acc.add(type(v).__name__ if not isinstance(v, bool) else "bool")
    if isinstance(v, (list, tuple)):
        for x in v:
            tag_set(x, acc)
    elif isinstance(v, dict):
        for x in v.values():
            tag_set(x, acc)
    return acc


# --------------------------------------------------------------------------
# fixture stores


def fixture_intervals():
    """Operation log for the 3-interval fixture: list of (level, [(c, n, value)])."""
    intervals = []
    for k in range(3):
        objs = []
        for i in range(6):
            container = ("hits", "tracks")[i % 2]
            value = Rec(run=k, idx=i, energy=float(10 * k + i) / 4,
                        samples=[(k * 7 + i * j) % 13 for j in range(12)],
                        tag=f"ev{k}{i}")
            objs.append((container, f"ev{k}{i:02d}", value))
        # mixed codecs: deflate level 1, raw, deflate level 9
        intervals.append(((1, 0, 9)[k], objs))
    return intervals


def build_fixture(path, intervals=None):
    """Write the fixture; return the committed state after each interval.

    ``states[k]`` maps (container, name) -> value after k commits, so
    ``states[0]`` is the empty store.
    """
    intervals = intervals or fixture_intervals()
    states = [{}]
    committed = {}
    with Session.open(path, create=True) as s:
        for level, objs in intervals:
            s.level = level
            for container, _, _ in objs:
                if not s.has_container(container):
                    s.create_container(container)
            for container, name, value in objs:
                s.put_object(container, name, value, "upsert")
                committed[(container, name)] = value
            s.commit()
            states.append(dict(committed))
    return states


def master_locators(path):
    """Offsets and ends of every master frame, found by walking frames."""
    data = open(path, "rb").read()
    pos, found = 16, []
    while pos + 14 <= len(data):
        (stored,) = struct.unpack_from("<I", data, pos)
        end = pos + 14 + stored
        if data[pos + 4] == 2:
            found.append((pos, end))
        pos = end
    return found


def frame_regions(path):
    """(offset, length, checksummed_start, checksummed_end) for every frame."""
    data = open(path, "rb").read()
    pos, found = 16, []
    while pos + 14 <= len(data):
        (stored,) = struct.unpack_from("<I", data, pos)
        end = pos + 14 + stored
        found.append((pos, end - pos, pos + 4, end - 4))
        pos = end
    return found


def copy_prefix(src, dst, n):
    with open(src, "rb") as fh:
        data = fh.read(n)
    with open(dst, "wb") as fh:
        fh.write(data)
    lock = os.fspath(dst) + ".lock"
    if os.path.exists(lock):
        os.unlink(lock)
