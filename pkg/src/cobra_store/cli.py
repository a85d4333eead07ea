"""``cps``: inspect, verify, repair and profile store files.

Exit status: 0 success or clean, 1 findings (damage, missing names),
2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from .catalog import Catalog, default_catalog_path, load_catalog, save_catalog
from .errors import (
    DuplicateLogical,
    InvalidName,
    LockHeld,
    NoSuchContainer,
    NotFound,
    StoreError,
    UnknownStore,
)
from .lock import WriterLock
from .session import Session
from .storefile import scan_recover, store_stats, verify_store
from .values import canonical_text

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


def _err(msg: str) -> None:
    print(f"cps: {msg}", file=sys.stderr)


def cmd_ls(args) -> int:
    with Session.open(args.store, "r") as s:
        if args.container is None:
            names = s.list_containers()
        else:
            try:
                names = s.list_objects(args.container, include_system=args.all)
            except NoSuchContainer:
                _err(f"no such container: {args.container}")
                return EXIT_FINDINGS
    for name in names:
        print(name)
    return EXIT_OK


def cmd_cat(args) -> int:
    with Session.open(args.store, "r") as s:
        try:
            value = s.get_object(args.container, args.object)
        except NotFound:
            _err(f"not found: {args.container}/{args.object}")
            return EXIT_FINDINGS
    print(canonical_text(value))
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify_store(args.store)
    for offset, reason in report.damaged:
        print(f"offset={offset} reason={reason}")
    if report.uncommitted_bytes and report.clean:
        print(f"uncommitted: {report.uncommitted_bytes} bytes after last master")
    status = "clean" if report.clean else f"damaged {len(report.damaged)} frames"
    print(f"{status}: {report.masters} masters, {report.object_frames} objects")
    return EXIT_OK if report.clean else EXIT_FINDINGS


def cmd_recover(args) -> int:
    # truncation rewrites the file, so it takes the writer lock like any writer
    with WriterLock(args.store):
        report = scan_recover(args.store)
        discarded = report.file_size - report.write_cursor
        if discarded:
            fd = os.open(args.store, os.O_RDWR)
            try:
                os.ftruncate(fd, report.write_cursor)
                os.fsync(fd)
            finally:
                os.close(fd)
    print(f"recovered seq={report.seq}, discarded {discarded} bytes")
    return EXIT_OK


def cmd_stats(args) -> int:
    st = store_stats(args.store)
    print(f"containers={st.containers}")
    print(f"objects={st.objects}")
    print(f"masters={st.masters}")
    print(f"file_size={st.file_size}")
    print(f"raw_payload_bytes={st.raw_payload_bytes}")
    print(f"stored_payload_bytes={st.stored_payload_bytes}")
    print(f"ratio={st.ratio:.3f}")
    return EXIT_OK


def _catalog_path(args):
    path = default_catalog_path(args.catalog)
    if path is None:
        raise _UsageError("no catalog: pass --catalog or set CPS_CATALOG")
    return path


def cmd_catalog_add(args) -> int:
    path = _catalog_path(args)
    cat = load_catalog(path) if os.path.exists(path) else Catalog()
    cat = cat.copy()
    try:
        cat.add(args.logical, args.physical)
    except (DuplicateLogical, InvalidName, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    save_catalog(cat, path)
    return EXIT_OK


def cmd_catalog_lookup(args) -> int:
    cat = load_catalog(_catalog_path(args))
    try:
        print(cat.lookup(args.logical))
    except UnknownStore as exc:
        _err(str(exc))
        return EXIT_FINDINGS
    return EXIT_OK


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cps", description="Inspect cobra-store files.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ls", help="list containers, or objects of one container")
    sp.add_argument("store")
    sp.add_argument("container", nargs="?")
    sp.add_argument("-a", "--all", action="store_true", help="include system objects")
    sp.set_defaults(func=cmd_ls)

    sp = sub.add_parser("cat", help="print an object as canonical text")
    sp.add_argument("store")
    sp.add_argument("container")
    sp.add_argument("object")
    sp.set_defaults(func=cmd_cat)

    sp = sub.add_parser("verify", help="check every frame of a store")
    sp.add_argument("store")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("recover", help="truncate a store after its last intact master")
    sp.add_argument("store")
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("stats", help="print counts and compression ratio")
    sp.add_argument("store")
    sp.set_defaults(func=cmd_stats)

    cp = sub.add_parser("catalog", help="edit or query the store catalog")
    csub = cp.add_subparsers(dest="catalog_command", required=True)
    for name, func, extra in (("add", cmd_catalog_add, ("logical", "physical")),
                              ("lookup", cmd_catalog_lookup, ("logical",))):
        sp = csub.add_parser(name)
        sp.add_argument("--catalog", help="catalog file (default: $CPS_CATALOG)")
        for arg in extra:
            sp.add_argument(arg)
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except _UsageError as exc:
        _err(str(exc))
        return EXIT_ERROR
    except LockHeld as exc:
        _err(f"store is in use: {exc}")
        return EXIT_ERROR
    except StoreError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_ERROR
    except OSError as exc:
        _err(str(exc))
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
