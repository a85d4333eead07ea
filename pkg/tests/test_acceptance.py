"""Exit criteria for the store, one test per criterion.

Each test records PASS/FAIL under its number; the summary is printed at the
end of the pytest run (see conftest.py).
"""

import contextlib
import hashlib
import random
import time
from pathlib import Path

import pytest

from cobra_store import (
    Catalog,
    NamespaceTable,
    Rec,
    Session,
    decode_value,
    encode_value,
    make_ref,
    store_stats,
    value_equal,
)
from cobra_store.cli import main as cps

from conftest import ACCEPTANCE_RESULTS
from helpers import (
    build_fixture,
    copy_prefix,
    depth_of,
    frame_regions,
    master_locators,
    random_value,
    tag_set,
)

GOLDEN = Path(__file__).parent / "golden"

SWEEP_TIME_LIMIT = 60.0
RATIO_GATE = 0.6
ROUND_TRIPS = 10_000
CORRUPTION_TRIALS = 100
BIND_STEPS = 1_000
BIND_SCOPES = 12
RELOAD_TABLES = 100
CORPUS_OBJECTS = 10_000
CORPUS_FIELDS = 32


@contextlib.contextmanager
def criterion(number, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        ACCEPTANCE_RESULTS.append((number, title, False, detail.get("msg", "")))
        raise
    ACCEPTANCE_RESULTS.append((number, title, True, detail.get("msg", "")))


def _run_cps(capsys, *argv):
    code = cps([str(a) for a in argv])
    out, _ = capsys.readouterr()
    return code, out


# --------------------------------------------------------------------------
# 1


def test_1_crash_window_sweep(tmp_path):
    with criterion(1, "crash-window truncation sweep") as info:
        src = tmp_path / "fixture.cps"
        states = build_fixture(src)
        assert all(len(states[k + 1]) - len(states[k]) >= 5 for k in range(3))
        masters = master_locators(src)
        assert len(masters) == 3
        size = src.stat().st_size
        dst = tmp_path / "cut.cps"
        seen = set()
        start = time.perf_counter()
        for n in range(16, size + 1):
            copy_prefix(src, dst, n)
            surviving = sum(1 for _, end in masters if end <= n)
            with Session.open(dst, "r") as s:
                assert s.seq in (0, 1, 2, 3)
                assert s.seq == surviving, f"truncated at {n}"
                expected = states[s.seq]
                got_keys = {(c, o) for c in s.list_containers() for o in s.list_objects(c)}
                assert got_keys == set(expected)
                for (c, o), v in expected.items():
                    assert value_equal(s.get_object(c, o), v)
            seen.add(surviving)
        elapsed = time.perf_counter() - start
        assert seen == {0, 1, 2, 3}
        assert elapsed < SWEEP_TIME_LIMIT
        info["msg"] = f"{size - 15} truncation points in {elapsed:.1f}s"


# --------------------------------------------------------------------------
# 2 and 3


def digitization_corpus(seed=2003, n=CORPUS_OBJECTS):
    """ADC-like records: pedestal plus noise, rare hits, 3 significant digits."""
    rng = random.Random(seed)
    names = [f"ch{i:02d}" for i in range(CORPUS_FIELDS)]
    for k in range(n):
        pedestal = rng.choice((98.0, 100.0, 102.0))
        rec = Rec()
        for name in names:
            x = pedestal + rng.gauss(0, 1.5)
            if rng.random() < 0.05:
                x += rng.expovariate(1 / 300)
            rec[name] = float(f"{x:.3g}")
        yield f"ev{k:05d}", rec


def _write_corpus(path, objects, level):
    start = time.perf_counter()
    with Session.open(path, create=True, level=level) as s:
        s.create_container("digi")
        for name, rec in objects:
            s.put_object("digi", name, rec)
        s.commit()
    return time.perf_counter() - start


@pytest.fixture(scope="module")
def corpus():
    objs = list(digitization_corpus())
    assert len(objs) == CORPUS_OBJECTS
    assert all(len(r) == CORPUS_FIELDS and all(isinstance(v, float) for v in r.values())
               for _, r in objs)
    return objs


def test_2_compression_ratio(tmp_path, corpus):
    with criterion(2, "level-1 file size <= 0.6 x raw") as info:
        _write_corpus(tmp_path / "l1.cps", corpus, 1)
        _write_corpus(tmp_path / "raw.cps", corpus, 0)
        l1 = (tmp_path / "l1.cps").stat().st_size
        raw = (tmp_path / "raw.cps").stat().st_size
        ratio = l1 / raw
        info["msg"] = (f"file ratio {ratio:.4f} ({l1} / {raw} bytes), "
                       f"payload ratio {store_stats(tmp_path / 'l1.cps').ratio:.4f}")
        print(f"\ncompression: {info['msg']}")
        assert ratio <= RATIO_GATE


def test_3_write_overhead(tmp_path, corpus):
    with criterion(3, "write-time overhead (report only)") as info:
        # alternate runs so drift in machine load hits both codecs alike
        t_l1, t_raw = [], []
        for i in range(3):
            t_l1.append(_write_corpus(tmp_path / f"l1_{i}.cps", corpus, 1))
            t_raw.append(_write_corpus(tmp_path / f"raw_{i}.cps", corpus, 0))
        ratio = min(t_l1) / min(t_raw)
        info["msg"] = f"level-1 {min(t_l1):.3f}s vs raw {min(t_raw):.3f}s, ratio {ratio:.3f}"
        print(f"\nwrite overhead: {info['msg']}")


# --------------------------------------------------------------------------
# 4


def test_4_value_round_trip():
    with criterion(4, "10^4 random values round-trip") as info:
        rng = random.Random(20030324)
        failures, tags, max_depth = 0, set(), 0
        for _ in range(ROUND_TRIPS):
            v = random_value(rng, 6)
            max_depth = max(max_depth, depth_of(v))
            tags |= tag_set(v)
            if not value_equal(decode_value(encode_value(v)), v):
                failures += 1
        assert tags == {"NoneType", "bool", "int", "float", "str", "bytes",
                        "list", "Rec", "dict", "PersistentRef"}
        assert max_depth <= 6
        info["msg"] = f"{failures} failures, max depth {max_depth}"
        assert failures == 0


# --------------------------------------------------------------------------
# 5


def test_5_corruption_detection(tmp_path, capsys):
    with criterion(5, "single-bit corruption flagged by verify") as info:
        src = tmp_path / "fixture.cps"
        build_fixture(src)
        pristine = src.read_bytes()
        regions = frame_regions(src)
        rng = random.Random(55)
        victim = tmp_path / "victim.cps"
        detected = 0
        for trial in range(CORRUPTION_TRIALS):
            offset, _, lo, hi = regions[trial % len(regions)]
            data = bytearray(pristine)
            data[rng.randrange(lo, hi)] ^= 1 << rng.randrange(8)
            victim.write_bytes(bytes(data))
            code, out = _run_cps(capsys, "verify", victim)
            if code == 1 and f"offset={offset} reason=checksum" in out.splitlines():
                detected += 1
        info["msg"] = f"{detected}/{CORRUPTION_TRIALS} detected over {len(regions)} frames"
        assert detected == CORRUPTION_TRIALS


# --------------------------------------------------------------------------
# 6


def _assert_bidirectional(table):
    for name, ref in table.forward.items():
        assert name in table.reverse[ref.canonical]
    for key, names in table.reverse.items():
        assert names == sorted(set(names))
        assert all(table.forward[n].canonical == key for n in names)


def test_6_namespace_bidirectionality(tmp_path):
    with criterion(6, "namespace forward/reverse consistency and reload") as info:
        rng = random.Random(66)
        path = tmp_path / "ns.cps"
        with Session.open(path, create=True) as s:
            scopes = []
            for c in ("alpha", "beta", "gamma", "delta"):
                s.create_container(c)
                scopes.append(c)
                for i in range(2):
                    s.put_object(c, f"obj{i}", Rec(i=i))
                    scopes.append(f"{c}/obj{i}")
            assert len(scopes) == BIND_SCOPES
            targets = [make_ref("", c, f"obj{i}") for c in ("alpha", "beta") for i in range(2)]
            targets.append(make_ref("other", "x", "y"))
            bound = 0
            for _ in range(BIND_STEPS):
                scope = rng.choice(scopes)
                name = f"n{rng.randint(0, 120)}"
                target = rng.choice(targets)
                if name not in s.namespace(scope).forward:
                    s.bind_name(scope, name, target)
                    bound += 1
                table = s.namespace(scope)
                _assert_bidirectional(table)
                assert s.resolve_name(scope, name) in targets
                for n in s.names_of(scope, target):
                    assert s.resolve_name(scope, n) == target
            live = {scope: s.namespace(scope) for scope in scopes}
            s.commit()
        with Session.open(path, "r") as s:
            for scope, table in live.items():
                assert s.namespace(scope) == table

        reloaded = 0
        for t in range(RELOAD_TABLES):
            p = tmp_path / f"t{t}.cps"
            with Session.open(p, create=True) as s:
                s.create_container("c")
                s.put_object("c", "host", Rec(v=t))
                scope = rng.choice(["c", "c/host"])
                expected = NamespaceTable()
                for _ in range(rng.randint(0, 30)):
                    name = f"k{rng.randint(0, 40)}"
                    target = make_ref(rng.choice(["", "geom"]), "c", f"o{rng.randint(0, 6)}")
                    if name in expected.forward:
                        continue
                    expected.bind(name, target)
                    s.bind_name(scope, name, target)
                s.commit()
            with Session.open(p, "r") as s:
                got = s.namespace(scope)
                if got == expected and got.forward == expected.forward \
                        and got.reverse == expected.reverse:
                    reloaded += 1
            p.unlink()
        info["msg"] = (f"{bound} binds over {len(scopes)} scopes consistent; "
                       f"{reloaded}/{RELOAD_TABLES} tables reload equal")
        assert reloaded == RELOAD_TABLES


# --------------------------------------------------------------------------
# 7


def test_7_reference_semantics(tmp_path):
    with criterion(7, "deref agrees with get_object; stable uids; cross-store") as info:
        src = tmp_path / "fixture.cps"
        states = build_fixture(src)
        committed = states[-1]
        with Session.open(src, "r") as s:
            uids = {}
            for (c, o), v in committed.items():
                value, uid = s.deref(make_ref("", c, o))
                assert value_equal(value, s.get_object(c, o))
                assert value_equal(value, v)
                uids[(c, o)] = uid
            assert len(set(uids.values())) == len(uids)
            for (c, o), uid in uids.items():
                assert s.deref(make_ref("", c, o))[1] == uid

        geom = tmp_path / "geom.cps"
        calib = tmp_path / "calib.cps"
        with Session.open(geom, create=True) as g:
            g.create_container("det")
            g.put_object("det", "layer1", Rec(z=12.5, material="Si"))
            g.commit()
        with Session.open(calib, create=True) as k:
            k.create_container("gains")
            k.put_object("gains", "run1", [1.01, 0.99, 1.0])
            k.commit()
        catalog = Catalog({"geom": str(geom), "calib": str(calib)})
        with Session.open(tmp_path / "event.cps", create=True, catalog=catalog) as s:
            s.create_container("ev")
            s.put_object("ev", "e1", Rec(geo=make_ref("geom", "det", "layer1"),
                                         gain=make_ref("calib", "gains", "run1")))
            s.commit()
            e1 = s.get_object("ev", "e1")
            geo, uid_geo = s.deref(e1["geo"])
            gain, uid_gain = s.deref(e1["gain"])
            assert geo == Rec(z=12.5, material="Si")
            assert gain == [1.01, 0.99, 1.0]
            assert s.deref(e1["geo"])[1] == uid_geo
            assert uid_geo != uid_gain
        info["msg"] = f"{len(committed)} intra-store refs, 2 cross-store refs"


# --------------------------------------------------------------------------
# 8


def golden_log(path):
    with Session.open(path, create=True, level=0) as s:
        s.create_container("hits")
        s.create_container("tracks")
        s.put_object("hits", "ev001", Rec(run=1, adc=[12, 40, 7], e=3.25))
        s.put_object("hits", "ev002", Rec(run=1, adc=[9, 11], e=1.5))
        s.commit()
        s.put_object("tracks", "t01", Rec(px=0.5, py=-1.25,
                                          hits=[make_ref("", "hits", "ev001"),
                                                make_ref("", "hits", "ev002")]))
        s.bind_name("tracks", "leading", make_ref("", "tracks", "t01"))
        s.commit()
        s.put_object("hits", "ev003", Rec(run=2, adc=[], e=0.0))
        s.put_object("hits", "ev001", Rec(run=1, adc=[12, 41, 7], e=3.5), "upsert")
        s.create_container("empty")
        s.commit()


def test_8_determinism_golden(tmp_path, capsys):
    with criterion(8, "deterministic bytes and golden CLI output") as info:
        a, b = tmp_path / "a" / "golden.cps", tmp_path / "b" / "golden.cps"
        a.parent.mkdir()
        b.parent.mkdir()
        golden_log(a)
        golden_log(b)
        assert a.read_bytes() == b.read_bytes()
        digest = hashlib.sha256(a.read_bytes()).hexdigest()
        assert digest == (GOLDEN / "golden.cps.sha256").read_text().split()[0]

        outputs = {
            "ls.txt": ("ls", a),
            "ls_hits.txt": ("ls", a, "hits"),
            "ls_tracks_all.txt": ("ls", a, "tracks", "-a"),
            "stats.txt": ("stats", a),
        }
        for fname, argv in outputs.items():
            code, out = _run_cps(capsys, *argv)
            assert code == 0
            assert out == (GOLDEN / fname).read_text(encoding="utf-8"), fname
            # and again, to show nothing varies between invocations
            assert _run_cps(capsys, *argv)[1] == out
        info["msg"] = f"sha256 {digest[:16]}..., {len(outputs)} golden outputs match"
