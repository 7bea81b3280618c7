"""Edit operation types: the replayable algebra of structure edits.

Every edit that creates nodes carries the created NodeIds explicitly, so a
recorded log replays to an identical document on any replica. Application
semantics live in :mod:`blockmerge.edits`; these types are pure data plus
their wire encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

from .model import ModelError, NodeId, NodeKind


@dataclass(frozen=True)
class NodeSpec:
    """A subtree to insert. User edits insert single nodes; merge-transformed
    inserts may carry whole row subtrees (a ``tr`` with its cells)."""

    kind: NodeKind
    new_id: NodeId
    user_id: str | None = None
    text: str | None = None
    formula: str | None = None
    children: tuple[NodeSpec, ...] = ()

    def walk_ids(self) -> list[NodeId]:
        ids = [self.new_id]
        for child in self.children:
            ids.extend(child.walk_ids())
        return ids


@dataclass(frozen=True)
class InsertNode:
    parent: NodeId
    position: int
    spec: NodeSpec


@dataclass(frozen=True)
class RemoveNode:
    target: NodeId


@dataclass(frozen=True)
class SetValue:
    target: NodeId
    new_text: str
    old_text: str


@dataclass(frozen=True)
class SetFormula:
    target: NodeId
    new_source: str
    old_source: str


@dataclass(frozen=True)
class ChangeNodeKind:
    target: NodeId
    from_kind: NodeKind
    to_kind: NodeKind


@dataclass(frozen=True)
class WrapChildren:
    target: NodeId
    wrapper_kind: NodeKind
    wrapper_id: NodeId


@dataclass(frozen=True)
class SplitValue:
    target: NodeId
    separator: str
    cell_kind: NodeKind
    cell_ids: tuple[NodeId, NodeId]


@dataclass(frozen=True)
class SortKey:
    """Declarative sort key; re-applied when a recorded permutation goes
    stale (concurrent membership changes)."""

    mode: str = "first-word"  # or "full-text"
    ascending: bool = True
    case_insensitive: bool = True


@dataclass(frozen=True)
class SortChildren:
    target: NodeId
    key: SortKey
    permutation: tuple[NodeId, ...]  # child ids in their new order


@dataclass(frozen=True)
class AddColumn:
    """Append a column: one header cell plus one default-valued cell per
    body row. ``cell_ids`` pairs each row id (header row included) with the
    id of its new cell."""

    table: NodeId
    header: str
    default: str
    cell_ids: tuple[tuple[NodeId, NodeId], ...]

    def cell_for(self, row_id: NodeId) -> NodeId | None:
        for rid, cid in self.cell_ids:
            if rid == row_id:
                return cid
        return None


PrimitiveEdit = Union[
    InsertNode,
    RemoveNode,
    SetValue,
    SetFormula,
    ChangeNodeKind,
    WrapChildren,
    SplitValue,
    SortChildren,
    AddColumn,
]


@dataclass(frozen=True)
class RefactorListToTable:
    """The four-step list-to-table refactoring, recorded as one edit with a
    frozen expansion. The table keeps the list's NodeId and user id."""

    list_id: NodeId
    separator: str
    headers: tuple[str, ...]
    default: str
    expansion: tuple[PrimitiveEdit, ...]

    name = "refactor-list-to-table"


CompositeEdit = RefactorListToTable

EditOp = Union[PrimitiveEdit, CompositeEdit]


@dataclass(frozen=True)
class LogEntry:
    op: EditOp
    ts: int  # per-replica logical timestamp


@dataclass(frozen=True)
class EditLog:
    base_version: str
    replica: str
    entries: tuple[LogEntry, ...] = ()

    def ops(self) -> list[EditOp]:
        return [entry.op for entry in self.entries]


def expand(op: EditOp) -> list[PrimitiveEdit]:
    """Primitive view of an edit; composites expand, primitives pass through."""
    if isinstance(op, RefactorListToTable):
        return list(op.expansion)
    return [op]


def created_ids(op: EditOp) -> list[NodeId]:
    """Every NodeId the edit mints."""
    ids: list[NodeId] = []
    for prim in expand(op):
        if isinstance(prim, InsertNode):
            ids.extend(prim.spec.walk_ids())
        elif isinstance(prim, WrapChildren):
            ids.append(prim.wrapper_id)
        elif isinstance(prim, SplitValue):
            ids.extend(prim.cell_ids)
        elif isinstance(prim, AddColumn):
            ids.extend(cid for _, cid in prim.cell_ids)
    return ids


# ---------------------------------------------------------------------------
# Wire encoding (line-delimited JSON logs, merge requests)


def _kind(value: str) -> NodeKind:
    try:
        return NodeKind(value)
    except ValueError:
        raise ModelError(f"unknown node kind: {value!r}") from None


def spec_to_jsonable(spec: NodeSpec) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": spec.kind.value, "newId": str(spec.new_id)}
    if spec.user_id is not None:
        out["userId"] = spec.user_id
    if spec.text is not None:
        out["text"] = spec.text
    if spec.formula is not None:
        out["formula"] = spec.formula
    if spec.children:
        out["children"] = [spec_to_jsonable(c) for c in spec.children]
    return out


def spec_from_jsonable(data: dict[str, Any]) -> NodeSpec:
    return NodeSpec(
        kind=_kind(data["kind"]),
        new_id=NodeId.parse(data["newId"]),
        user_id=data.get("userId"),
        text=data.get("text"),
        formula=data.get("formula"),
        children=tuple(spec_from_jsonable(c) for c in data.get("children", [])),
    )


def op_to_jsonable(op: EditOp) -> dict[str, Any]:
    if isinstance(op, InsertNode):
        return {
            "type": "insert",
            "parent": str(op.parent),
            "position": op.position,
            "spec": spec_to_jsonable(op.spec),
        }
    if isinstance(op, RemoveNode):
        return {"type": "remove", "target": str(op.target)}
    if isinstance(op, SetValue):
        return {
            "type": "set-value",
            "target": str(op.target),
            "newText": op.new_text,
            "oldText": op.old_text,
        }
    if isinstance(op, SetFormula):
        return {
            "type": "set-formula",
            "target": str(op.target),
            "newSource": op.new_source,
            "oldSource": op.old_source,
        }
    if isinstance(op, ChangeNodeKind):
        return {
            "type": "change-kind",
            "target": str(op.target),
            "from": op.from_kind.value,
            "to": op.to_kind.value,
        }
    if isinstance(op, WrapChildren):
        return {
            "type": "wrap-children",
            "target": str(op.target),
            "wrapperKind": op.wrapper_kind.value,
            "wrapperId": str(op.wrapper_id),
        }
    if isinstance(op, SplitValue):
        return {
            "type": "split-value",
            "target": str(op.target),
            "separator": op.separator,
            "cellKind": op.cell_kind.value,
            "cellIds": [str(c) for c in op.cell_ids],
        }
    if isinstance(op, SortChildren):
        return {
            "type": "sort-children",
            "target": str(op.target),
            "key": {
                "mode": op.key.mode,
                "ascending": op.key.ascending,
                "caseInsensitive": op.key.case_insensitive,
            },
            "permutation": [str(c) for c in op.permutation],
        }
    if isinstance(op, AddColumn):
        return {
            "type": "add-column",
            "table": str(op.table),
            "header": op.header,
            "default": op.default,
            "cellIds": [[str(r), str(c)] for r, c in op.cell_ids],
        }
    if isinstance(op, RefactorListToTable):
        return {
            "type": "refactor-list-to-table",
            "list": str(op.list_id),
            "separator": op.separator,
            "headers": list(op.headers),
            "default": op.default,
            "expansion": [op_to_jsonable(p) for p in op.expansion],
        }
    raise ModelError(f"unknown edit op: {op!r}")


def op_from_jsonable(data: Any) -> EditOp:
    if not isinstance(data, dict) or "type" not in data:
        raise ModelError("edit op must be an object with a 'type' field")
    kind = data["type"]
    try:
        if kind == "insert":
            return InsertNode(
                parent=NodeId.parse(data["parent"]),
                position=int(data["position"]),
                spec=spec_from_jsonable(data["spec"]),
            )
        if kind == "remove":
            return RemoveNode(target=NodeId.parse(data["target"]))
        if kind == "set-value":
            return SetValue(
                target=NodeId.parse(data["target"]),
                new_text=data["newText"],
                old_text=data.get("oldText", ""),
            )
        if kind == "set-formula":
            return SetFormula(
                target=NodeId.parse(data["target"]),
                new_source=data["newSource"],
                old_source=data.get("oldSource", ""),
            )
        if kind == "change-kind":
            return ChangeNodeKind(
                target=NodeId.parse(data["target"]),
                from_kind=_kind(data["from"]),
                to_kind=_kind(data["to"]),
            )
        if kind == "wrap-children":
            return WrapChildren(
                target=NodeId.parse(data["target"]),
                wrapper_kind=_kind(data["wrapperKind"]),
                wrapper_id=NodeId.parse(data["wrapperId"]),
            )
        if kind == "split-value":
            cells = [NodeId.parse(c) for c in data["cellIds"]]
            if len(cells) != 2:
                raise ModelError("split-value carries exactly two cell ids")
            return SplitValue(
                target=NodeId.parse(data["target"]),
                separator=data["separator"],
                cell_kind=_kind(data["cellKind"]),
                cell_ids=(cells[0], cells[1]),
            )
        if kind == "sort-children":
            key = data.get("key", {})
            return SortChildren(
                target=NodeId.parse(data["target"]),
                key=SortKey(
                    mode=key.get("mode", "first-word"),
                    ascending=bool(key.get("ascending", True)),
                    case_insensitive=bool(key.get("caseInsensitive", True)),
                ),
                permutation=tuple(NodeId.parse(c) for c in data["permutation"]),
            )
        if kind == "add-column":
            return AddColumn(
                table=NodeId.parse(data["table"]),
                header=data["header"],
                default=data["default"],
                cell_ids=tuple(
                    (NodeId.parse(r), NodeId.parse(c)) for r, c in data["cellIds"]
                ),
            )
        if kind == "refactor-list-to-table":
            expansion = tuple(op_from_jsonable(p) for p in data["expansion"])
            return RefactorListToTable(
                list_id=NodeId.parse(data["list"]),
                separator=data["separator"],
                headers=tuple(data["headers"]),
                default=data["default"],
                expansion=expansion,  # type: ignore[arg-type]
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed {kind!r} edit op: {exc}") from exc
    raise ModelError(f"unknown edit op type: {kind!r}")
