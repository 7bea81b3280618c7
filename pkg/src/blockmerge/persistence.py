"""Durable storage: canonical document snapshots and append-only edit logs.

Documents serialize to canonical JSON (fixed field order ``id, kind, userId,
text, formula, children``, compact separators, UTF-8, trailing newline);
byte-identical input documents produce byte-identical files. The version
hash is the SHA-256 hex digest of those bytes: stable across runs and
platforms, and any serialized-byte difference changes it.

Edit logs are line-delimited JSON: a header line ``{"baseVersion", "replica"}``
followed by one ``{"ts", "replica", "op"}`` line per entry. Appends flush to
the OS on every call; fsync is left to the platform (desk-scale durability).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .edits import EditError, apply_edit
from .model import Document, ModelError, document_from_jsonable, document_to_jsonable
from .ops import EditLog, EditOp, LogEntry, op_from_jsonable, op_to_jsonable

VersionHash = str


class PersistenceError(Exception):
    """Unreadable or inconsistent stored data."""


class ReplayError(PersistenceError):
    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"log entry {index}: {message}")
        self.index = index


def canonical_bytes(doc: Document) -> bytes:
    text = json.dumps(
        document_to_jsonable(doc), ensure_ascii=False, separators=(",", ":")
    )
    return text.encode("utf-8") + b"\n"


def version_hash(doc: Document) -> VersionHash:
    return hashlib.sha256(canonical_bytes(doc)).hexdigest()


def save_document(doc: Document, destination: str | Path) -> VersionHash:
    data = canonical_bytes(doc)
    Path(destination).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_document(source: str | Path) -> Document:
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read document {path}: {exc}") from exc
    try:
        return document_from_jsonable(data)
    except ModelError as exc:
        raise PersistenceError(f"invalid document {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Edit logs


def create_log_file(
    destination: str | Path, base_version: VersionHash, replica: str
) -> None:
    header = json.dumps(
        {"baseVersion": base_version, "replica": replica},
        ensure_ascii=False,
        separators=(",", ":"),
    )
    Path(destination).write_text(header + "\n", encoding="utf-8")


def _read_header(path: Path) -> dict:
    try:
        with path.open("r", encoding="utf-8") as handle:
            line = handle.readline()
        header = json.loads(line)
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read log header {path}: {exc}") from exc
    if not isinstance(header, dict) or "baseVersion" not in header:
        raise PersistenceError(f"malformed log header in {path}")
    return header


def append_edit(
    destination: str | Path,
    op: EditOp,
    ts: int,
    replica: str,
    base_version: VersionHash,
) -> None:
    """Append one entry; the log must already exist with a matching
    base-version header."""
    path = Path(destination)
    header = _read_header(path)
    if header["baseVersion"] != base_version:
        raise PersistenceError(
            f"log {path} has base {header['baseVersion'][:12]}…, "
            f"expected {base_version[:12]}…"
        )
    if header.get("replica") != replica:
        raise PersistenceError(
            f"log {path} belongs to replica {header.get('replica')!r}, not {replica!r}"
        )
    line = json.dumps(
        {"ts": ts, "replica": replica, "op": op_to_jsonable(op)},
        ensure_ascii=False,
        separators=(",", ":"),
    )
    with path.open("a", encoding="utf-8") as handle:
        handle.write(line + "\n")
        handle.flush()


def save_log(log: EditLog, destination: str | Path) -> None:
    create_log_file(destination, log.base_version, log.replica)
    for entry in log.entries:
        append_edit(destination, entry.op, entry.ts, log.replica, log.base_version)


def load_log(source: str | Path) -> EditLog:
    path = Path(source)
    header = _read_header(path)
    entries: list[LogEntry] = []
    with path.open("r", encoding="utf-8") as handle:
        handle.readline()
        for lineno, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entries.append(
                    LogEntry(op=op_from_jsonable(record["op"]), ts=int(record["ts"]))
                )
            except (json.JSONDecodeError, KeyError, ModelError, ValueError) as exc:
                raise PersistenceError(
                    f"malformed log entry at {path}:{lineno}: {exc}"
                ) from exc
    return EditLog(
        base_version=header["baseVersion"],
        replica=header.get("replica", "?"),
        entries=tuple(entries),
    )


def replay(base: Document, log: EditLog) -> Document:
    """Left fold of apply over the log; the base hash must match."""
    if log.base_version != version_hash(base):
        raise PersistenceError("log base version does not match the base document")
    doc = base
    for index, entry in enumerate(log.entries):
        try:
            doc = apply_edit(doc, entry.op)
        except EditError as exc:
            raise ReplayError(index, f"{exc.code}: {exc}") from exc
    return doc
