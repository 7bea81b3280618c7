from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from blockmerge import demo
from blockmerge.model import document_from_jsonable, structurally_equal
from blockmerge.ops import op_to_jsonable
from blockmerge.service import create_app


@pytest.fixture()
def client(figures):
    app = create_app(fixture_docs={"conf": figures["fig2"], "budget": figures["fig6"]})
    return TestClient(app)


def _op_body(replica, op):
    return {"replica": replica, "op": op_to_jsonable(op)}


def test_get_document(client, figures):
    response = client.get("/docs/conf")
    assert response.status_code == 200
    body = response.json()
    doc = document_from_jsonable(body["document"])
    assert structurally_equal(doc, figures["fig2"])
    assert body["version"]


def test_get_unknown_doc_404(client):
    assert client.get("/docs/nope").status_code == 404


def test_post_edit_applies_and_reports(client, figures, handles):
    from blockmerge.model import IdAllocator, NodeKind
    from blockmerge.ops import InsertNode, NodeSpec

    alloc = IdAllocator(figures["fig6"], "ws")
    op = InsertNode(
        handles.speakers_list,
        3,
        NodeSpec(NodeKind.LIST_ITEM, alloc.fresh(), text="Grace Hopper, gh@navy.mil"),
    )
    response = client.post("/docs/budget/edits", json=_op_body("A", op))
    assert response.status_code == 200
    body = response.json()
    assert len(body["dirty"]) == 2
    values = sorted(v["number"] for v in body["values"].values())
    assert values == [4.0, 4800.0]


def test_post_invalid_edit_422(client, handles):
    from blockmerge.ops import SetValue

    op = SetValue(handles.speakers_list, "nope", "")
    response = client.post("/docs/conf/edits", json=_op_body("A", op))
    assert response.status_code == 422
    assert response.json()["detail"]["reason"] == "not-textual"


def test_paper_merge_over_http(client, figures, handles, demo_logs):
    for entry in demo_logs["org1_s4"].entries:
        assert client.post(
            "/docs/conf/edits", json=_op_body("A", entry.op)
        ).status_code == 200
    for entry in demo_logs["org2_s4"].entries:
        assert client.post(
            "/docs/conf/edits", json=_op_body("B", entry.op)
        ).status_code == 200
    response = client.post("/docs/conf/merge", json={"a": "A", "b": "B"})
    assert response.status_code == 200
    body = response.json()
    merged = document_from_jsonable(body["document"])
    assert structurally_equal(merged, figures["fig5"])
    assert body["conflicts"] == []
    # both panes now see the merged base
    for replica in ("A", "B"):
        view = client.get(f"/docs/conf?replica={replica}").json()
        assert view["version"] == body["version"]


def test_conflicting_merge_409_then_resolve(client, handles):
    from blockmerge.ops import SetValue

    target = handles.items[0]
    client.post("/docs/conf/edits", json=_op_body("A", SetValue(target, "x", "")))
    client.post("/docs/conf/edits", json=_op_body("B", SetValue(target, "y", "")))
    response = client.post("/docs/conf/merge", json={"a": "A", "b": "B"})
    assert response.status_code == 409
    conflict_id = response.json()["conflictId"]
    assert response.json()["conflict"]["kind"] == "concurrent-set-value"

    # edits are blocked while the merge is pending
    blocked = client.post(
        "/docs/conf/edits", json=_op_body("A", SetValue(target, "z", ""))
    )
    assert blocked.status_code == 409

    done = client.post(
        f"/docs/conf/merge/{conflict_id}", json={"choice": "take-b"}
    )
    assert done.status_code == 200
    merged = document_from_jsonable(done.json()["document"])
    assert merged.find(target).text == "y"


def test_merge_abort_clears_pending(client, handles):
    from blockmerge.ops import SetValue

    target = handles.items[0]
    client.post("/docs/conf/edits", json=_op_body("A", SetValue(target, "x", "")))
    client.post("/docs/conf/edits", json=_op_body("B", SetValue(target, "y", "")))
    assert client.post("/docs/conf/merge", json={"a": "A", "b": "B"}).status_code == 409
    assert client.delete("/docs/conf/merge").status_code == 200
    # pane edits work again after the abort
    ok = client.post("/docs/conf/edits", json=_op_body("A", SetValue(target, "z", "x")))
    assert ok.status_code == 200


def test_wrong_conflict_id_404(client, handles):
    from blockmerge.ops import SetValue

    target = handles.items[0]
    client.post("/docs/conf/edits", json=_op_body("A", SetValue(target, "x", "")))
    client.post("/docs/conf/edits", json=_op_body("B", SetValue(target, "y", "")))
    client.post("/docs/conf/merge", json={"a": "A", "b": "B"})
    assert client.post("/docs/conf/merge/c99", json={"choice": "take-a"}).status_code == 404


def test_dirty_since(client, figures, handles):
    from blockmerge.model import IdAllocator, NodeKind
    from blockmerge.ops import InsertNode, NodeSpec

    v0 = client.get("/docs/budget").json()["version"]
    alloc = IdAllocator(figures["fig6"], "ws")
    op = InsertNode(
        handles.speakers_list,
        3,
        NodeSpec(NodeKind.LIST_ITEM, alloc.fresh(), text="Grace Hopper, gh@navy.mil"),
    )
    client.post("/docs/budget/edits", json=_op_body("A", op))
    dirty = client.get(f"/docs/budget/dirty?since={v0}").json()["dirty"]
    assert len(dirty) == 2
    unknown = client.get("/docs/budget/dirty?since=deadbeef")
    assert unknown.status_code == 404


def test_create_document_endpoint(client, figures):
    from blockmerge.model import document_to_jsonable

    payload = {"document": document_to_jsonable(figures["fig3"])}
    assert client.post("/docs/new-doc", json=payload).status_code == 200
    body = client.get("/docs/new-doc").json()
    assert structurally_equal(
        document_from_jsonable(body["document"]), figures["fig3"]
    )
    assert client.post("/docs/new-doc", json=payload).status_code == 409


def test_api_determinism(figures, handles, demo_logs):
    def run():
        app = create_app(fixture_docs={"conf": figures["fig2"]})
        client = TestClient(app)
        bodies = []
        for entry in demo_logs["org1_s4"].entries:
            bodies.append(
                client.post("/docs/conf/edits", json=_op_body("A", entry.op)).text
            )
        for entry in demo_logs["org2_s4"].entries:
            bodies.append(
                client.post("/docs/conf/edits", json=_op_body("B", entry.op)).text
            )
        bodies.append(client.post("/docs/conf/merge", json={"a": "A", "b": "B"}).text)
        return bodies

    assert run() == run()
