"""Tree model for block-structured documents.

A document is a tree of typed block nodes. Every node carries a hidden,
stable identity (:class:`NodeId`) that survives re-kinding and re-parenting
during refactorings; the optional user-visible id (``user_id``, rendered as
``id='speakers'`` in selectors) is a separate attribute.

Documents behave as immutable values: editing operations clone the tree and
return a new document. Structure sharing is not attempted; documents here are
desk-scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator


class ModelError(Exception):
    """Invalid document construction, lookup, or serialization input."""


class InvariantViolation(ModelError):
    """A document failed a structural invariant check."""


@dataclass(frozen=True, order=True)
class NodeId:
    """Stable node identity: (replica, counter), totally ordered."""

    replica: str
    counter: int

    def __str__(self) -> str:
        return f"{self.replica}:{self.counter}"

    @classmethod
    def parse(cls, text: str) -> NodeId:
        # replica strings may contain ':'; the counter never does.
        replica, _, counter = text.rpartition(":")
        if not replica or not counter.isdigit():
            raise ModelError(f"malformed node id: {text!r}")
        return cls(replica, int(counter))


class NodeKind(str, Enum):
    DOCUMENT = "document"
    HEADING = "heading"
    PARAGRAPH = "p"
    LIST = "ul"
    LIST_ITEM = "li"
    TABLE = "table"
    TABLE_BODY = "tbody"
    TABLE_ROW = "tr"
    TABLE_CELL = "td"
    DEF_LIST = "dl"
    DEF_TERM = "dt"
    DEF_VALUE = "dd"
    COMPUTED = "computed-value"

    def __str__(self) -> str:  # serialization uses the tag form
        return self.value


_BLOCKS = frozenset(
    {
        NodeKind.HEADING,
        NodeKind.PARAGRAPH,
        NodeKind.LIST,
        NodeKind.TABLE,
        NodeKind.DEF_LIST,
        NodeKind.COMPUTED,
    }
)

#: Which child kinds each parent kind admits. A table may carry one leading
#: header row (a ``tr`` directly under ``table``) ahead of its ``tbody``;
#: everything row-like otherwise lives inside the body.
ALLOWED_CHILDREN: dict[NodeKind, frozenset[NodeKind]] = {
    NodeKind.DOCUMENT: _BLOCKS,
    NodeKind.HEADING: frozenset(),
    NodeKind.PARAGRAPH: frozenset(),
    NodeKind.LIST: frozenset({NodeKind.LIST_ITEM}),
    NodeKind.LIST_ITEM: frozenset({NodeKind.TABLE_CELL}),
    NodeKind.TABLE: frozenset({NodeKind.TABLE_ROW, NodeKind.TABLE_BODY}),
    NodeKind.TABLE_BODY: frozenset({NodeKind.TABLE_ROW}),
    NodeKind.TABLE_ROW: frozenset({NodeKind.TABLE_CELL}),
    NodeKind.TABLE_CELL: frozenset(),
    NodeKind.DEF_LIST: frozenset({NodeKind.DEF_TERM, NodeKind.DEF_VALUE}),
    NodeKind.DEF_TERM: frozenset(),
    NodeKind.DEF_VALUE: frozenset({NodeKind.COMPUTED}),
    NodeKind.COMPUTED: frozenset(),
}

#: Kinds that may carry a text payload when they have no children.
TEXTUAL_KINDS = frozenset(
    {
        NodeKind.HEADING,
        NodeKind.PARAGRAPH,
        NodeKind.LIST_ITEM,
        NodeKind.TABLE_CELL,
        NodeKind.DEF_TERM,
        NodeKind.DEF_VALUE,
    }
)


@dataclass
class Node:
    """One block node. ``formula`` holds the canonical source (with the
    leading ``=``) and is present iff ``kind`` is computed-value. ``cached``
    is the display string of the last evaluation; it is derived state and is
    never serialized."""

    id: NodeId
    kind: NodeKind
    user_id: str | None = None
    text: str | None = None
    formula: str | None = None
    children: list[Node] = field(default_factory=list)
    cached: str | None = None

    def clone(self) -> Node:
        return Node(
            id=self.id,
            kind=self.kind,
            user_id=self.user_id,
            text=self.text,
            formula=self.formula,
            children=[c.clone() for c in self.children],
            cached=self.cached,
        )

    def walk(self) -> Iterator[Node]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class Document:
    """A document tree plus per-replica id allocation state.

    ``next_counters[r]`` is strictly greater than every counter of every node
    this document has seen minted by replica ``r``.
    """

    root: Node
    next_counters: dict[str, int] = field(default_factory=dict)

    def clone(self) -> Document:
        return Document(self.root.clone(), dict(self.next_counters))

    def walk(self) -> Iterator[Node]:
        return self.root.walk()

    def find(self, node_id: NodeId) -> Node | None:
        for node in self.walk():
            if node.id == node_id:
                return node
        return None

    def parent_of(self, node_id: NodeId) -> tuple[Node, int] | None:
        """The (parent, child-index) of a node, or None for the root/absent."""
        for node in self.walk():
            for i, child in enumerate(node.children):
                if child.id == node_id:
                    return node, i
        return None

    def note_minted(self, node_id: NodeId) -> None:
        nxt = self.next_counters.get(node_id.replica, 0)
        if node_id.counter >= nxt:
            self.next_counters[node_id.replica] = node_id.counter + 1


def validate_replica_id(replica: str) -> None:
    if not replica or "/" in replica or any(ch.isspace() for ch in replica):
        raise ModelError(f"invalid replica identifier: {replica!r}")


def create_document(replica: str) -> Document:
    """A fresh empty document whose root id is minted by ``replica``."""
    validate_replica_id(replica)
    root = Node(id=NodeId(replica, 0), kind=NodeKind.DOCUMENT)
    return Document(root=root, next_counters={replica: 1})


def find(doc: Document, node_id: NodeId) -> Node | None:
    return doc.find(node_id)


class IdAllocator:
    """Mints fresh NodeIds for one replica against a document's counters."""

    def __init__(self, doc: Document, replica: str) -> None:
        validate_replica_id(replica)
        self.replica = replica
        self._next = doc.next_counters.get(replica, 0)

    def fresh(self) -> NodeId:
        node_id = NodeId(self.replica, self._next)
        self._next += 1
        return node_id


# ---------------------------------------------------------------------------
# Invariants


def check_invariants(doc: Document) -> None:
    """Raise InvariantViolation on duplicate ids, duplicate user ids,
    illegal parent/child kinds, or malformed content payloads."""
    if doc.root.kind is not NodeKind.DOCUMENT:
        raise InvariantViolation(f"root kind is {doc.root.kind}, not document")
    seen_ids: set[NodeId] = set()
    seen_user_ids: set[str] = set()
    for node in doc.walk():
        if node.id in seen_ids:
            raise InvariantViolation(f"duplicate node id {node.id}")
        seen_ids.add(node.id)
        if node.user_id is not None:
            if node.user_id in seen_user_ids:
                raise InvariantViolation(f"duplicate user id {node.user_id!r}")
            seen_user_ids.add(node.user_id)
        _check_content(node)
        allowed = ALLOWED_CHILDREN[node.kind]
        for child in node.children:
            if child.kind not in allowed:
                raise InvariantViolation(
                    f"kind {child.kind} is not a legal child of {node.kind}"
                )


def _check_content(node: Node) -> None:
    if node.kind is NodeKind.COMPUTED:
        if node.formula is None:
            raise InvariantViolation(f"computed node {node.id} lacks a formula")
        if node.text is not None or node.children:
            raise InvariantViolation(f"computed node {node.id} carries extra content")
        return
    if node.formula is not None:
        raise InvariantViolation(f"{node.kind} node {node.id} carries a formula")
    if node.text is not None:
        if node.children:
            raise InvariantViolation(f"node {node.id} has both text and children")
        if node.kind not in TEXTUAL_KINDS:
            raise InvariantViolation(f"{node.kind} node {node.id} cannot hold text")


# ---------------------------------------------------------------------------
# Structural equality


def structurally_equal(a: Document, b: Document) -> bool:
    """Tree equality ignoring NodeIds (and cached display values): kind,
    user_id, text, formula, and child order all must match."""
    return _nodes_equal(a.root, b.root)


def _nodes_equal(a: Node, b: Node) -> bool:
    if (a.kind, a.user_id, a.text, a.formula) != (b.kind, b.user_id, b.text, b.formula):
        return False
    if len(a.children) != len(b.children):
        return False
    return all(_nodes_equal(x, y) for x, y in zip(a.children, b.children))


# ---------------------------------------------------------------------------
# Rendering


def render(doc: Document) -> str:
    """Deterministic plain-text rendering: one line per heading/paragraph,
    ``- `` list items, tables as a header line plus one line per body row
    with `` | `` separators, definition lists as alternating term/value
    lines, computed values as their cached value or ``=source``."""
    lines: list[str] = []
    for block in doc.root.children:
        lines.extend(_render_block(block))
    return "\n".join(lines)


def _render_block(node: Node) -> list[str]:
    if node.kind in (NodeKind.HEADING, NodeKind.PARAGRAPH):
        return [node.text or ""]
    if node.kind is NodeKind.LIST:
        return ["- " + _inline_text(item) for item in node.children]
    if node.kind is NodeKind.TABLE:
        lines = []
        for child in node.children:
            if child.kind is NodeKind.TABLE_ROW:
                lines.append(_render_row(child))
            else:
                lines.extend(_render_row(row) for row in child.children)
        return lines
    if node.kind is NodeKind.DEF_LIST:
        return [_inline_text(child) for child in node.children]
    if node.kind is NodeKind.COMPUTED:
        return [_computed_text(node)]
    return [_inline_text(node)]


def _render_row(row: Node) -> str:
    return " | ".join(_inline_text(cell) for cell in row.children)


def _inline_text(node: Node) -> str:
    if node.kind is NodeKind.COMPUTED:
        return _computed_text(node)
    if node.text is not None:
        return node.text
    if node.children:
        if node.kind in (NodeKind.LIST_ITEM, NodeKind.TABLE_ROW):
            return " | ".join(_inline_text(c) for c in node.children)
        if len(node.children) == 1:
            return _inline_text(node.children[0])
        return " ".join(_inline_text(c) for c in node.children)
    return ""


def _computed_text(node: Node) -> str:
    if node.cached is not None:
        return node.cached
    return node.formula or ""


# ---------------------------------------------------------------------------
# Canonical serialization (tree-shaped JSON; field order fixed)


def node_to_jsonable(node: Node) -> dict[str, Any]:
    out: dict[str, Any] = {"id": str(node.id), "kind": node.kind.value}
    if node.user_id is not None:
        out["userId"] = node.user_id
    if node.text is not None:
        out["text"] = node.text
    if node.formula is not None:
        out["formula"] = node.formula
    out["children"] = [node_to_jsonable(c) for c in node.children]
    return out


def node_from_jsonable(data: Any) -> Node:
    if not isinstance(data, dict):
        raise ModelError(f"node must be an object, got {type(data).__name__}")
    try:
        node_id = NodeId.parse(data["id"])
    except KeyError:
        raise ModelError("node missing 'id'") from None
    kind_text = data.get("kind")
    try:
        kind = NodeKind(kind_text)
    except ValueError:
        raise ModelError(f"unknown node kind: {kind_text!r}") from None
    node = Node(
        id=node_id,
        kind=kind,
        user_id=data.get("userId"),
        text=data.get("text"),
        formula=data.get("formula"),
        children=[node_from_jsonable(c) for c in data.get("children", [])],
    )
    return node


def document_to_jsonable(doc: Document) -> dict[str, Any]:
    return node_to_jsonable(doc.root)


def document_from_jsonable(data: Any) -> Document:
    """Rebuild a document from its canonical encoding and validate it.

    Allocation counters are recovered conservatively as max-seen + 1 per
    replica; callers that must guarantee no reuse of removed ids (editors)
    keep their own allocator state in their edit logs.
    """
    root = node_from_jsonable(data)
    doc = Document(root=root)
    for node in doc.walk():
        doc.note_minted(node.id)
    check_invariants(doc)
    return doc
