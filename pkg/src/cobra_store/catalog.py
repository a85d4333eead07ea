"""Logical store name -> physical file path registry.

File format: UTF-8 text, one ``logical<TAB>path`` entry per line. Blank
lines and lines starting with ``#`` are ignored. Saved files list entries
in ascending logical-name order with no comments.
"""

from __future__ import annotations

import os

from .errors import DuplicateLogical, InvalidName, IoFailure, ParseError, UnknownStore
from .naming import check_name

CATALOG_ENV = "CPS_CATALOG"


class Catalog:
    def __init__(self, entries=None):
        self.entries: dict[str, str] = {}
        for logical, physical in (entries or {}).items():
            self.add(logical, physical)

    def __eq__(self, other):
        if not isinstance(other, Catalog):
            return NotImplemented
        return self.entries == other.entries

    def __len__(self):
        return len(self.entries)

    def __contains__(self, logical):
        return logical in self.entries

    def __repr__(self):
        return f"Catalog({self.entries!r})"

    def copy(self) -> "Catalog":
        return Catalog(self.entries)

    def add(self, logical: str, physical) -> None:
        check_name(logical, what="logical name", allow_pipe=False)
        if logical.startswith("#") or not logical.strip():
            # such lines read back as comments or blanks
            raise InvalidName(f"logical name {logical!r} cannot be stored in a catalog file")
        physical = os.fspath(physical)
        if not physical:
            raise ValueError("physical path must be non-empty")
        if "\n" in physical or "\r" in physical:
            raise ValueError("physical path may not contain line breaks")
        if logical in self.entries:
            raise DuplicateLogical(f"{logical!r} already maps to {self.entries[logical]}")
        self.entries[logical] = physical

    def lookup(self, logical: str) -> str:
        try:
            return self.entries[logical]
        except KeyError:
            raise UnknownStore(f"store {logical!r} is not in the catalog") from None

    def dumps(self) -> str:
        return "".join(f"{k}\t{self.entries[k]}\n" for k in sorted(self.entries))

    @classmethod
    def loads(cls, text: str) -> "Catalog":
        cat = cls()
        for lineno, line in enumerate(text.split("\n"), 1):
            line = line.removesuffix("\r")
            if not line.strip() or line.startswith("#"):
                continue
            logical, tab, physical = line.partition("\t")
            if not tab:
                raise ParseError("expected 'logical<TAB>path'", line=lineno)
            try:
                cat.add(logical, physical)
            except (DuplicateLogical, ValueError) as exc:
                raise ParseError(str(exc), line=lineno) from None
        return cat


def load_catalog(path) -> Catalog:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8: {exc}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read catalog {path}: {exc}") from exc
    return Catalog.loads(text)


def save_catalog(catalog: Catalog, path) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(catalog.dumps())
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write catalog {path}: {exc}") from exc


def default_catalog_path(override=None):
    """``override`` if given, else ``$CPS_CATALOG``, else None."""
    return override or os.environ.get(CATALOG_ENV) or None
