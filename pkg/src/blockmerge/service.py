"""HTTP service hosting documents, edits, and resumable interactive merges.

Each document session keeps a shared base plus one fork per replica; edits
apply to a replica's fork and accumulate in its log. A merge folds two
replica logs over the base: conflicts surface as ``409`` responses carrying
a conflict id, the client answers on ``POST /docs/{id}/merge/{conflictId}``,
and on completion the merged document becomes the new shared base for both
replicas. Requests for one document are serialized; distinct documents
proceed in parallel.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse

from . import demo
from .edits import apply_edit, validate
from .formulas import eval_formula, value_to_jsonable
from .merge import Conflict, MergeOutcome, MergeSession, Resolution
from .model import (
    Document,
    ModelError,
    NodeId,
    document_from_jsonable,
    document_to_jsonable,
    render,
)
from .ops import EditLog, EditOp, LogEntry, ModelError as OpError, op_from_jsonable
from .persistence import version_hash
from .recompute import dirty_set, recompute


@dataclass
class ReplicaFork:
    doc: Document
    entries: list[LogEntry] = field(default_factory=list)
    next_ts: int = 1


@dataclass
class PendingMerge:
    session: MergeSession
    conflict: Conflict
    replicas: tuple[str, str]


@dataclass
class DocSession:
    base: Document
    base_version: str
    forks: dict[str, ReplicaFork] = field(default_factory=dict)
    pending: PendingMerge | None = None
    history: list[tuple[str, list[str]]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def fork(self, replica: str) -> ReplicaFork:
        if replica not in self.forks:
            self.forks[replica] = ReplicaFork(doc=self.base)
        return self.forks[replica]


def create_app(fixture_docs: dict[str, Document] | None = None) -> FastAPI:
    app = FastAPI(title="blockmerge", version="0.1.0")
    sessions: dict[str, DocSession] = {}
    registry_lock = threading.Lock()

    def _new_session(doc: Document) -> DocSession:
        version = version_hash(doc)
        session = DocSession(base=doc, base_version=version)
        session.history.append((version, []))
        return session

    if fixture_docs:
        for doc_id, doc in fixture_docs.items():
            sessions[doc_id] = _new_session(doc)

    def _session(doc_id: str) -> DocSession:
        with registry_lock:
            session = sessions.get(doc_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        return session

    def _doc_payload(doc: Document) -> dict[str, Any]:
        return {
            "document": document_to_jsonable(doc),
            "version": version_hash(doc),
            "render": render(doc),
        }

    @app.post("/docs/{doc_id}")
    def create_doc(doc_id: str, body: dict = Body(default={})) -> dict:
        with registry_lock:
            if doc_id in sessions:
                raise HTTPException(status_code=409, detail="document already exists")
        if "document" in body:
            try:
                doc = document_from_jsonable(body["document"])
            except ModelError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        elif "fixture" in body:
            figures = demo.build_figures()
            if body["fixture"] not in figures:
                raise HTTPException(
                    status_code=404, detail=f"unknown fixture {body['fixture']!r}"
                )
            doc = figures[body["fixture"]]
        else:
            doc = demo.build_base().doc
        session = _new_session(doc)
        with registry_lock:
            sessions[doc_id] = session
        return {"version": session.base_version}

    @app.get("/docs/{doc_id}")
    def get_doc(doc_id: str, replica: str | None = Query(default=None)) -> dict:
        session = _session(doc_id)
        with session.lock:
            doc = session.fork(replica).doc if replica else session.base
            return _doc_payload(doc)

    @app.post("/docs/{doc_id}/edits")
    def post_edit(doc_id: str, body: dict = Body(...)) -> dict:
        session = _session(doc_id)
        replica = body.get("replica", "A")
        try:
            op: EditOp = op_from_jsonable(body["op"])
        except (KeyError, OpError) as exc:
            raise HTTPException(status_code=422, detail={"reason": "malformed-op",
                                                         "message": str(exc)}) from exc
        with session.lock:
            if session.pending is not None:
                raise HTTPException(status_code=409, detail="merge in progress")
            fork = session.fork(replica)
            reason = validate(fork.doc, op)
            if reason is not None:
                raise HTTPException(status_code=422, detail={"reason": reason})
            dirty = dirty_set(fork.doc, op)
            new_doc = recompute(apply_edit(fork.doc, op), dirty)
            fork.entries.append(LogEntry(op=op, ts=fork.next_ts))
            fork.next_ts += 1
            fork.doc = new_doc
            version = version_hash(new_doc)
            dirty_ids = sorted(str(i) for i in dirty)
            session.history.append((version, dirty_ids))
            values = {
                str(i): value_to_jsonable(eval_formula(new_doc, i)) for i in dirty
            }
            payload = _doc_payload(new_doc)
            payload.update({"dirty": dirty_ids, "values": values})
            return payload

    def _conflict_response(session: DocSession) -> JSONResponse:
        assert session.pending is not None
        conflict = session.pending.conflict
        return JSONResponse(
            status_code=409,
            content={
                "conflict": conflict.to_jsonable(),
                "conflictId": conflict.conflict_id,
            },
        )

    def _finish_merge(session: DocSession, outcome: MergeOutcome) -> dict:
        assert outcome.document is not None
        merged = outcome.document
        dirty = outcome.dirty
        merged = recompute(merged, dirty)
        version = version_hash(merged)
        session.base = merged
        session.base_version = version
        session.forks.clear()
        session.pending = None
        dirty_ids = sorted(str(i) for i in dirty)
        session.history.append((version, dirty_ids))
        values = {str(i): value_to_jsonable(eval_formula(merged, i)) for i in dirty}
        payload = _doc_payload(merged)
        payload.update(
            {
                "conflicts": [c.to_jsonable() for c in outcome.conflicts],
                "dirty": dirty_ids,
                "values": values,
            }
        )
        return payload

    @app.post("/docs/{doc_id}/merge")
    def start_merge(doc_id: str, body: dict = Body(...)) -> Any:
        session = _session(doc_id)
        with session.lock:
            if session.pending is not None:
                raise HTTPException(
                    status_code=409,
                    detail={
                        "reason": "merge-pending",
                        "conflictId": session.pending.conflict.conflict_id,
                    },
                )
            replica_a = body.get("a", "A")
            replica_b = body.get("b", "B")
            fork_a = session.fork(replica_a)
            fork_b = session.fork(replica_b)
            log_a = EditLog(session.base_version, replica_a, tuple(fork_a.entries))
            log_b = EditLog(session.base_version, replica_b, tuple(fork_b.entries))
            merge_session = MergeSession(session.base, log_a, log_b)
            step = merge_session.start()
            if isinstance(step, Conflict):
                session.pending = PendingMerge(
                    session=merge_session,
                    conflict=step,
                    replicas=(replica_a, replica_b),
                )
                return _conflict_response(session)
            return _finish_merge(session, step)

    @app.post("/docs/{doc_id}/merge/{conflict_id}")
    def resolve_conflict(doc_id: str, conflict_id: str, body: dict = Body(...)) -> Any:
        session = _session(doc_id)
        with session.lock:
            pending = session.pending
            if pending is None:
                raise HTTPException(status_code=404, detail="no merge in progress")
            if pending.conflict.conflict_id != conflict_id:
                raise HTTPException(
                    status_code=404,
                    detail=f"outstanding conflict is {pending.conflict.conflict_id!r}",
                )
            choice = body.get("choice")
            if choice not in ("take-a", "take-b", "custom"):
                raise HTTPException(
                    status_code=422, detail={"reason": "bad-choice"}
                )
            step = pending.session.provide(
                Resolution(choice=choice, payload=body.get("payload"))
            )
            if isinstance(step, Conflict):
                pending.conflict = step
                return _conflict_response(session)
            return _finish_merge(session, step)

    @app.delete("/docs/{doc_id}/merge")
    def abort_merge(doc_id: str) -> dict:
        session = _session(doc_id)
        with session.lock:
            if session.pending is None:
                raise HTTPException(status_code=404, detail="no merge in progress")
            session.pending.session.abort()
            session.pending = None
            return {"aborted": True}

    @app.get("/docs/{doc_id}/dirty")
    def dirty_since(doc_id: str, since: str = Query(...)) -> dict:
        session = _session(doc_id)
        with session.lock:
            versions = [v for v, _ in session.history]
            if since not in versions:
                raise HTTPException(status_code=404, detail="unknown version")
            index = versions.index(since)
            invalidated: list[str] = []
            for _, ids in session.history[index + 1 :]:
                invalidated.extend(i for i in ids if i not in invalidated)
            return {"dirty": invalidated}

    _mount_frontend(app)
    return app


def _mount_frontend(app: FastAPI) -> None:
    """Serve the two-pane web UI when its build output is present."""
    frontend = Path(__file__).resolve().parents[2] / "frontend"
    if (frontend / "index.html").exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=frontend, html=True), name="ui")


def node_id(text: str) -> NodeId:
    return NodeId.parse(text)
