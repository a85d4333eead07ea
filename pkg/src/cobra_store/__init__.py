"""cobra-store: an embedded, crash-consistent named-object store.

One file per store, containers of uniquely named objects inside it,
name-based persistent references, bidirectional namespaces, and commit
intervals that become visible all at once when their master record lands.
"""

from .catalog import Catalog, load_catalog, save_catalog
from .commit import CommitResult, CrashInjection, CrashOutcome, commit_with_crash
from .errors import *  # noqa: F401,F403
from .refs import NamespaceTable, make_ref
from .session import Session
from .storefile import (
    CODEC_DEFLATE,
    CODEC_RAW,
    DEFAULT_LEVEL,
    REC_MASTER,
    REC_OBJECT,
    Locator,
    MasterRecord,
    RecoveryReport,
    StoreHandle,
    compress_payload,
    crc32,
    create_store,
    decompress_payload,
    open_store,
    scan_recover,
    store_stats,
    verify_store,
)
from .values import PersistentRef, Rec, canonical_text, decode_value, encode_value, value_equal

__version__ = "0.1.0"
