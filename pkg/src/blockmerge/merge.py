"""Merge engine: fold two concurrent edit logs into one converged document.

The two logs are ordered canonically by replica id (smaller first), the
first log is applied as-is, and every edit of the second log is transformed
across the whole first log before being applied. Because the ordering is by
replica id and never by argument order, ``merge(base, a, b)`` and
``merge(base, b, a)`` are literally the same computation, which is what
makes the merge order-insensitive.

Incompatible edit pairs never raise: they become typed :class:`Conflict`
values routed through a resolver (or an interactive prompt channel), and
``option_a`` always denotes the lexicographically smaller replica's side.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Generator, Iterable, Protocol

from .edits import (
    EditError,
    apply_edit,
    derive_permutation,
    split_text,
)
from .edits import _apply_primitive  # composite stepping for rewrite snapshots
from .formulas import (
    FormulaSyntaxError,
    parse_formula,
    print_formula,
    rewrite_ast,
)
from .model import Document, InvariantViolation, Node, NodeId, NodeKind
from .ops import (
    AddColumn,
    ChangeNodeKind,
    EditLog,
    EditOp,
    InsertNode,
    LogEntry,
    NodeSpec,
    PrimitiveEdit,
    RefactorListToTable,
    RemoveNode,
    SetFormula,
    SetValue,
    SortChildren,
    SplitValue,
    WrapChildren,
    created_ids,
    expand,
)
from .persistence import version_hash
from .recompute import dirty_set
from .selectors import RewriteResult, Selector, rewrite_through


class MergeError(Exception):
    """Merge preconditions violated (base mismatch, equal replica ids,
    inapplicable first log)."""


class ConflictsUnresolved(Exception):
    """Raised by the fail-on-conflict resolver."""

    def __init__(self, conflict: Conflict) -> None:
        super().__init__(f"unresolved {conflict.kind} conflict at {conflict.site}")
        self.conflict = conflict


@dataclass(frozen=True)
class ConflictOption:
    description: str
    payload: Any = None


@dataclass
class Conflict:
    kind: str  # concurrent-set-value | remove-vs-edit | split-vs-set-value
    #         | sort-vs-sort | formula-rewrite-ambiguous
    site: NodeId
    option_a: ConflictOption  # the smaller replica's side, always
    option_b: ConflictOption
    conflict_id: str = ""
    resolution: Resolution | None = None

    def to_jsonable(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "conflictId": self.conflict_id,
            "kind": self.kind,
            "site": str(self.site),
            "optionA": {
                "description": self.option_a.description,
                "payload": self.option_a.payload,
            },
            "optionB": {
                "description": self.option_b.description,
                "payload": self.option_b.payload,
            },
        }
        if self.resolution is not None:
            out["resolution"] = {
                "choice": self.resolution.choice,
                "payload": self.resolution.payload,
            }
        return out


@dataclass(frozen=True)
class Resolution:
    choice: str  # take-a | take-b | custom
    payload: Any = None


TAKE_A = Resolution("take-a")
TAKE_B = Resolution("take-b")


class Resolver(Protocol):
    def resolve(self, conflict: Conflict) -> Resolution: ...


class PolicyResolver:
    """Non-interactive resolver; ``prefer='a'`` is the prefer-smaller-replica
    default policy."""

    def __init__(self, prefer: str = "a") -> None:
        if prefer not in ("a", "b"):
            raise ValueError("prefer must be 'a' or 'b'")
        self.prefer = prefer

    def resolve(self, conflict: Conflict) -> Resolution:
        return TAKE_A if self.prefer == "a" else TAKE_B


class FailOnConflict:
    def resolve(self, conflict: Conflict) -> Resolution:
        raise ConflictsUnresolved(conflict)


class PromptChannel(Protocol):
    """Interactive resolution contract: at most one outstanding prompt;
    ``ask`` returns None when the channel has closed."""

    def ask(self, conflict: Conflict) -> Resolution | None: ...


@dataclass
class MergeOutcome:
    document: Document | None
    applied: tuple[EditOp, ...]
    conflicts: tuple[Conflict, ...]
    dirty: frozenset[NodeId]
    incomplete: bool = False


def mint_cell_id(row_id: NodeId, column: int) -> NodeId:
    """Deterministic id for a cell a merge must create for a row the other
    replica never saw. Both merge directions mint the same id."""
    return NodeId(f"~{row_id.replica}~{row_id.counter}", column)


# ---------------------------------------------------------------------------
# First-log indices


@dataclass
class _FirstLogFacts:
    steps: list[tuple[PrimitiveEdit, Document]] = field(default_factory=list)
    set_values: dict[NodeId, str] = field(default_factory=dict)
    set_formulas: dict[NodeId, str] = field(default_factory=dict)
    splits: dict[NodeId, SplitValue] = field(default_factory=dict)
    wraps: dict[NodeId, WrapChildren] = field(default_factory=dict)
    sorts: dict[NodeId, SortChildren] = field(default_factory=dict)
    refactors: dict[NodeId, RefactorListToTable] = field(default_factory=dict)
    add_columns: dict[NodeId, list[AddColumn]] = field(default_factory=dict)
    removed: dict[NodeId, tuple[Document, NodeId, int]] = field(default_factory=dict)
    removed_ids: set[NodeId] = field(default_factory=set)
    edit_targets: set[NodeId] = field(default_factory=set)


def _index_first_log(base: Document, ops: list[EditOp]) -> tuple[Document, _FirstLogFacts]:
    facts = _FirstLogFacts()
    doc = base
    for op in ops:
        if isinstance(op, RefactorListToTable):
            facts.refactors[op.list_id] = op
        scratch = doc.clone()
        for prim in expand(op):
            facts.steps.append((prim, scratch.clone()))
            _record_prim(facts, prim, scratch)
            _apply_primitive(scratch, prim)
        new_doc = apply_edit(doc, op)  # op-level validation
        doc = new_doc
    return doc, facts


def _record_prim(facts: _FirstLogFacts, prim: PrimitiveEdit, pre: Document) -> None:
    if isinstance(prim, SetValue):
        facts.set_values[prim.target] = prim.new_text
        facts.edit_targets.add(prim.target)
    elif isinstance(prim, SetFormula):
        facts.set_formulas[prim.target] = prim.new_source
        facts.edit_targets.add(prim.target)
    elif isinstance(prim, SplitValue):
        facts.splits[prim.target] = prim
        facts.edit_targets.add(prim.target)
    elif isinstance(prim, ChangeNodeKind):
        facts.edit_targets.add(prim.target)
    elif isinstance(prim, WrapChildren):
        facts.wraps[prim.target] = prim
        facts.edit_targets.add(prim.target)
    elif isinstance(prim, SortChildren):
        facts.sorts[prim.target] = prim
    elif isinstance(prim, AddColumn):
        facts.add_columns.setdefault(prim.table, []).append(prim)
        facts.edit_targets.add(prim.table)
    elif isinstance(prim, InsertNode):
        facts.edit_targets.add(prim.parent)
    elif isinstance(prim, RemoveNode):
        node = pre.find(prim.target)
        located = pre.parent_of(prim.target)
        if node is not None and located is not None:
            facts.removed[prim.target] = (pre.clone(), located[0].id, located[1])
            facts.removed_ids.update(n.id for n in node.walk())


def _spec_user_ids(spec: NodeSpec) -> list[tuple[str, NodeId]]:
    found = []
    if spec.user_id is not None:
        found.append((spec.user_id, spec.new_id))
    for child in spec.children:
        found.extend(_spec_user_ids(child))
    return found


# ---------------------------------------------------------------------------
# Merge session


class MergeSession:
    """Resumable merge: ``start()`` returns either a MergeOutcome or the
    first Conflict; ``provide(resolution)`` continues until the outcome."""

    def __init__(self, base: Document, log_a: EditLog, log_b: EditLog) -> None:
        base_hash = version_hash(base)
        if log_a.base_version != base_hash or log_b.base_version != base_hash:
            raise MergeError("edit log base version does not match the base document")
        if log_a.replica == log_b.replica:
            raise MergeError("cannot merge two logs from the same replica")
        self.base = base
        self.first, self.second = sorted(
            (log_a, log_b), key=lambda log: log.replica
        )
        self.conflicts: list[Conflict] = []
        self._gen = self._run()
        self._finished: MergeOutcome | None = None

    # -- driver surface

    def start(self) -> Conflict | MergeOutcome:
        return self._advance(lambda: next(self._gen))

    def provide(self, resolution: Resolution) -> Conflict | MergeOutcome:
        return self._advance(lambda: self._gen.send(resolution))

    def abort(self) -> MergeOutcome:
        self._gen.close()
        return MergeOutcome(
            document=None,
            applied=(),
            conflicts=tuple(self.conflicts),
            dirty=frozenset(),
            incomplete=True,
        )

    def _advance(self, step) -> Conflict | MergeOutcome:
        if self._finished is not None:
            return self._finished
        try:
            return step()
        except StopIteration as stop:
            self._finished = stop.value
            return self._finished

    # -- conflict helper

    def _conflict(
        self,
        kind: str,
        site: NodeId,
        option_a: ConflictOption,
        option_b: ConflictOption,
    ) -> Generator[Conflict, Resolution, Resolution]:
        conflict = Conflict(
            kind=kind,
            site=site,
            option_a=option_a,
            option_b=option_b,
            conflict_id=f"c{len(self.conflicts) + 1}",
        )
        resolution = yield conflict
        conflict.resolution = resolution
        self.conflicts.append(conflict)
        return resolution

    # -- the transform pipeline

    def _run(self) -> Generator[Conflict, Resolution, MergeOutcome]:
        try:
            doc, facts = _index_first_log(self.base, self.first.ops())
        except EditError as exc:
            raise MergeError(f"first log is not applicable: {exc}") from exc
        self.doc = doc
        self.facts = facts
        self.alias: dict[NodeId, NodeId] = {}
        self.dropped_created: set[NodeId] = set()
        applied: list[EditOp] = list(self.first.ops())

        second_view = self.base
        for entry in self.second.entries:
            op = entry.op
            transformed = yield from self._transform_op(op, second_view)
            for new_op in transformed:
                try:
                    self.doc = apply_edit(self.doc, new_op)
                    applied.append(new_op)
                except (EditError, InvariantViolation) as exc:
                    yield from self._net_skip(op, new_op, exc)
            try:
                second_view = apply_edit(second_view, op)
            except EditError as exc:
                raise MergeError(
                    f"second log is not applicable in its own order: {exc}"
                ) from exc

        dirty = _accumulate_dirty(self.base, applied)
        dirty = frozenset(i for i in dirty if self.doc.find(i) is not None)
        return MergeOutcome(
            document=self.doc,
            applied=tuple(applied),
            conflicts=tuple(self.conflicts),
            dirty=dirty,
        )

    def _net_skip(self, original: EditOp, failed: EditOp, exc: Exception):
        """Last-resort completeness net: a transformed edit that still fails
        validation is dropped, surfaced as a typed conflict."""
        code = getattr(exc, "code", "kind-illegal")
        kind = "remove-vs-edit" if code == "missing-target" else "concurrent-set-value"
        site = _op_site(failed)
        skip = ConflictOption(
            f"keep the merged document as-is; the edit cannot be replayed ({code})"
        )
        yield from self._conflict(kind, site, skip, skip)
        self.dropped_created.update(created_ids(original))

    # -- per-op transforms -------------------------------------------------

    def _transform_op(self, op: EditOp, second_view: Document):
        op = _dealias(op, self.alias)
        if isinstance(op, RefactorListToTable):
            return (yield from self._transform_refactor(op, second_view))
        if isinstance(op, InsertNode):
            return (yield from self._transform_insert(op, second_view))
        if isinstance(op, RemoveNode):
            return (yield from self._transform_remove(op))
        if isinstance(op, SetValue):
            return (yield from self._transform_set_value(op))
        if isinstance(op, SetFormula):
            return (yield from self._transform_set_formula(op))
        if isinstance(op, ChangeNodeKind):
            return (yield from self._transform_change_kind(op))
        if isinstance(op, WrapChildren):
            return (yield from self._transform_wrap(op))
        if isinstance(op, SplitValue):
            return (yield from self._transform_split(op, second_view))
        if isinstance(op, SortChildren):
            return (yield from self._transform_sort(op))
        if isinstance(op, AddColumn):
            return (yield from self._transform_add_column(op))
        return [op]

    def _missing_target(self, op: EditOp, target: NodeId, describe: str):
        """Shared handling for a second-log edit whose target the first log
        removed: conflict, optionally resurrecting the removed subtree."""
        if target in self.dropped_created or target not in self.facts.removed_ids:
            # Dropped with its creator earlier, or never existed in the
            # merged doc; drop this edit (and its creations) silently.
            self.dropped_created.update(created_ids(op))
            return []
        resolution = yield from self._conflict(
            "remove-vs-edit",
            target,
            ConflictOption(f"keep the removal; drop: {describe}"),
            ConflictOption(f"restore the removed content and apply: {describe}"),
        )
        if resolution.choice == "take-a":
            self.dropped_created.update(created_ids(op))
            return []
        restore = self._resurrect_ops(target)
        return restore + [op]

    def _resurrect_ops(self, target: NodeId) -> list[EditOp]:
        """Inserts that restore the removed subtree containing ``target``,
        with its original ids, at its old position (clamped)."""
        for removed_root, (pre_doc, parent_id, index) in self.facts.removed.items():
            node = pre_doc.find(removed_root)
            if node is None or pre_doc.find(target) is None:
                continue
            if target not in {n.id for n in node.walk()}:
                continue
            ops: list[EditOp] = []
            if self.doc.find(parent_id) is None:
                ops.extend(self._resurrect_ops(parent_id))
            spec = _node_to_spec(node)
            parent_now = self.doc.find(parent_id)
            position = index
            if parent_now is not None:
                position = min(index, len(parent_now.children))
            ops.append(InsertNode(parent=parent_id, position=position, spec=spec))
            return ops
        return []

    def _transform_insert(self, op: InsertNode, second_view: Document):
        parent = self.doc.find(op.parent)
        if parent is None:
            return (
                yield from self._missing_target(
                    op, op.parent, f"insert of {op.spec.kind.value}"
                )
            )

        # Duplicate user-visible ids make selectors ambiguous.
        spec = op.spec
        existing_user_ids = {
            n.user_id for n in self.doc.walk() if n.user_id is not None
        }
        dup = [uid for uid, _ in _spec_user_ids(spec) if uid in existing_user_ids]
        if dup:
            resolution = yield from self._conflict(
                "formula-rewrite-ambiguous",
                op.parent,
                ConflictOption(
                    f"keep id {dup[0]!r} on the existing node; insert without it"
                ),
                ConflictOption(f"skip the insert entirely (id {dup[0]!r} is taken)"),
            )
            if resolution.choice == "take-b":
                self.dropped_created.update(created_ids(op))
                return []
            spec = _strip_user_ids(spec, set(dup))

        spec = yield from self._rewrite_spec_formulas(spec)

        refactor = self.facts.refactors.get(op.parent)
        if (
            refactor is not None
            and parent.kind is NodeKind.TABLE
            and spec.kind is NodeKind.LIST_ITEM
        ):
            as_row = self._insert_as_row(op, spec, parent, refactor, second_view)
            if as_row is not None:
                return [as_row]

        container = parent
        if parent.id in self.facts.wraps:
            wrapper_id = self.facts.wraps[parent.id].wrapper_id
            wrapper = self.doc.find(wrapper_id)
            if wrapper is not None:
                container = wrapper
        position = _map_position(
            container, op.parent, op.position, second_view, self.alias
        )
        return [InsertNode(parent=container.id, position=position, spec=spec)]

    def _insert_as_row(
        self,
        op: InsertNode,
        spec: NodeSpec,
        table: Node,
        refactor: RefactorListToTable,
        second_view: Document,
    ) -> InsertNode | None:
        """An insert aimed at a list the first log refactored re-formats into
        the new shape: a row with split cells plus defaults for every added
        column. None when the table's body is gone (handled downstream)."""
        header_row = next(
            (c for c in table.children if c.kind is NodeKind.TABLE_ROW), None
        )
        tbody = next(
            (c for c in table.children if c.kind is NodeKind.TABLE_BODY), None
        )
        if tbody is None:
            return None
        if spec.children:
            cells = list(spec.children)  # already split; keep the cells
        else:
            first, second = split_text(spec.text or "", refactor.separator)
            cells = [
                NodeSpec(NodeKind.TABLE_CELL, mint_cell_id(spec.new_id, 0), text=first),
                NodeSpec(NodeKind.TABLE_CELL, mint_cell_id(spec.new_id, 1), text=second),
            ]
            for text in _column_defaults(table, refactor, self.facts):
                cells.append(
                    NodeSpec(
                        kind=NodeKind.TABLE_CELL,
                        new_id=mint_cell_id(spec.new_id, len(cells)),
                        text=text,
                    )
                )
        # Pad to the header width in case columns were added by other means.
        while header_row is not None and len(cells) < len(header_row.children):
            cells.append(
                NodeSpec(
                    kind=NodeKind.TABLE_CELL,
                    new_id=mint_cell_id(spec.new_id, len(cells)),
                    text=refactor.default,
                )
            )
        row_spec = NodeSpec(
            kind=NodeKind.TABLE_ROW,
            new_id=spec.new_id,
            user_id=spec.user_id,
            children=tuple(cells),
        )
        position = _map_position(
            tbody, op.parent, op.position, second_view, self.alias
        )
        return InsertNode(parent=tbody.id, position=position, spec=row_spec)

    def _transform_remove(self, op: RemoveNode):
        if self.doc.find(op.target) is None:
            # Already gone (first log removed it, or its creator was
            # skipped); converged intent either way.
            return []
        subtree = {n.id for n in self.doc.find(op.target).walk()}
        edited = subtree & self.facts.edit_targets
        if edited:
            resolution = yield from self._conflict(
                "remove-vs-edit",
                op.target,
                ConflictOption("keep the node (it carries concurrent edits)"),
                ConflictOption("remove it anyway"),
            )
            if resolution.choice == "take-a":
                return []
        return [op]

    def _transform_set_value(self, op: SetValue):
        target = self.doc.find(op.target)
        if target is None:
            return (
                yield from self._missing_target(
                    op, op.target, f"set text to {op.new_text!r}"
                )
            )
        first_text = self.facts.set_values.get(op.target)
        if first_text is not None and first_text != op.new_text:
            resolution = yield from self._conflict(
                "concurrent-set-value",
                op.target,
                ConflictOption(f"keep {first_text!r}", first_text),
                ConflictOption(f"use {op.new_text!r}", op.new_text),
            )
            if resolution.choice == "take-a":
                return []
            if resolution.choice == "custom":
                op = replace(op, new_text=str(resolution.payload))
        elif first_text == op.new_text:
            return []
        split = self.facts.splits.get(op.target)
        if split is not None and target.children:
            return (yield from self._resplit_set_value(op, target, split))
        return [op]

    def _resplit_set_value(self, op: SetValue, target: Node, split: SplitValue):
        """New text aimed at a node the first log split is re-split with the
        same separator; losing the separator is surfaced as a conflict."""
        cells = [c for c in target.children if c.text is not None]

        def spread(texts: list[str]) -> list[EditOp]:
            padded = texts + [""] * (len(cells) - len(texts))
            return [
                SetValue(cell.id, text, cell.text or "")
                for cell, text in zip(cells, padded)
            ]

        if not cells:
            return []
        if split.separator in op.new_text:
            first, second = split_text(op.new_text, split.separator)
            return spread([first, second])
        resolution = yield from self._conflict(
            "split-vs-set-value",
            op.target,
            ConflictOption(
                "keep the split cells as they are",
                [c.text for c in cells],
            ),
            ConflictOption(
                f"put the whole new text {op.new_text!r} in the first cell",
                op.new_text,
            ),
        )
        if resolution.choice == "take-a":
            return []
        if resolution.choice == "custom" and isinstance(resolution.payload, list):
            return spread([str(t) for t in resolution.payload[: len(cells)]])
        return spread([op.new_text])

    def _transform_set_formula(self, op: SetFormula):
        if self.doc.find(op.target) is None:
            return (
                yield from self._missing_target(op, op.target, "formula change")
            )
        first_source = self.facts.set_formulas.get(op.target)
        if first_source is not None and first_source != op.new_source:
            resolution = yield from self._conflict(
                "concurrent-set-value",
                op.target,
                ConflictOption(f"keep {first_source!r}", first_source),
                ConflictOption(f"use {op.new_source!r}", op.new_source),
            )
            if resolution.choice == "take-a":
                return []
            if resolution.choice == "custom":
                op = replace(op, new_source=str(resolution.payload))
        source = yield from self._rewrite_formula_source(op.new_source, op.target)
        if source is None:
            return []
        return [replace(op, new_source=source)]

    def _transform_change_kind(self, op: ChangeNodeKind):
        target = self.doc.find(op.target)
        if target is None:
            return (
                yield from self._missing_target(
                    op, op.target, f"kind change to {op.to_kind.value}"
                )
            )
        if target.kind is op.from_kind:
            return [op]
        if target.kind is op.to_kind:
            return []
        resolution = yield from self._conflict(
            "concurrent-set-value",
            op.target,
            ConflictOption(f"keep kind {target.kind.value}", target.kind.value),
            ConflictOption(f"change kind to {op.to_kind.value}", op.to_kind.value),
        )
        if resolution.choice == "take-a":
            return []
        return [ChangeNodeKind(op.target, target.kind, op.to_kind)]

    def _transform_wrap(self, op: WrapChildren):
        target = self.doc.find(op.target)
        if target is None:
            return (yield from self._missing_target(op, op.target, "wrap children"))
        first_wrap = self.facts.wraps.get(op.target)
        if first_wrap is not None and first_wrap.wrapper_kind is op.wrapper_kind:
            self.alias[op.wrapper_id] = first_wrap.wrapper_id
            return []
        return [op]

    def _transform_split(self, op: SplitValue, second_view: Document):
        target = self.doc.find(op.target)
        if target is None:
            return (yield from self._missing_target(op, op.target, "split value"))
        first_split = self.facts.splits.get(op.target)
        if first_split is None or not target.children:
            return [op]
        current_cells = [c.id for c in target.children]
        for mine, theirs in zip(op.cell_ids, current_cells):
            self.alias[mine] = theirs
        if first_split.separator == op.separator:
            return []
        original = second_view.find(op.target)
        original_text = original.text if original is not None else None
        resolution = yield from self._conflict(
            "concurrent-set-value",
            op.target,
            ConflictOption(
                f"keep the split on {first_split.separator!r}",
                first_split.separator,
            ),
            ConflictOption(f"re-split on {op.separator!r}", op.separator),
        )
        if resolution.choice == "take-a" or original_text is None:
            return []
        parts = list(split_text(original_text, op.separator))
        cells = [c for c in target.children if c.text is not None]
        parts += [""] * (len(cells) - len(parts))
        return [
            SetValue(cell.id, text, cell.text or "")
            for cell, text in zip(cells, parts)
        ]

    def _transform_sort(self, op: SortChildren):
        target = self.doc.find(op.target)
        if target is None:
            return (yield from self._missing_target(op, op.target, "sort children"))
        container = target
        wrap = self.facts.wraps.get(op.target)
        if wrap is not None:
            wrapper = self.doc.find(wrap.wrapper_id)
            if wrapper is not None:
                container = wrapper
        first_sort = self.facts.sorts.get(op.target) or (
            self.facts.sorts.get(container.id)
        )
        if first_sort is not None and first_sort.key != op.key:
            resolution = yield from self._conflict(
                "sort-vs-sort",
                op.target,
                ConflictOption("keep the first ordering", _key_payload(first_sort)),
                ConflictOption("apply this ordering", _key_payload(op)),
            )
            if resolution.choice == "take-a":
                return []
        permutation = op.permutation
        current = [c.id for c in container.children]
        if sorted(permutation) != sorted(current):
            permutation = derive_permutation(container, op.key)
        if list(permutation) == current:
            return []
        return [SortChildren(container.id, op.key, permutation)]

    def _transform_add_column(self, op: AddColumn):
        table = self.doc.find(op.table)
        if table is None:
            return (
                yield from self._missing_target(
                    op, op.table, f"add column {op.header!r}"
                )
            )
        if table.kind is not NodeKind.TABLE:
            skip = ConflictOption(
                f"skip adding column {op.header!r}: node is {table.kind.value}"
            )
            yield from self._conflict("concurrent-set-value", op.table, skip, skip)
            return []
        header_row = next(
            (c for c in table.children if c.kind is NodeKind.TABLE_ROW), None
        )
        rows = [
            row
            for child in table.children
            if child.kind is NodeKind.TABLE_BODY
            for row in child.children
        ]
        if header_row is None:
            skip = ConflictOption(f"skip adding column {op.header!r}: no header row")
            yield from self._conflict("concurrent-set-value", op.table, skip, skip)
            return []
        column = len(header_row.children)
        recorded = dict(op.cell_ids)
        cell_ids: list[tuple[NodeId, NodeId]] = []
        taken = {n.id for n in self.doc.walk()}
        for row in [header_row] + rows:
            cell = recorded.get(row.id)
            if cell is None or cell in taken:
                cell = mint_cell_id(row.id, column)
            cell_ids.append((row.id, cell))
        return [replace(op, cell_ids=tuple(cell_ids))]

    def _transform_refactor(self, op: RefactorListToTable, second_view: Document):
        target = self.doc.find(op.list_id)
        if target is None:
            return (
                yield from self._missing_target(
                    op, op.list_id, "refactor list into a table"
                )
            )
        if target.kind is NodeKind.LIST:
            return [_reexpand_refactor(op, target)]
        first = self.facts.refactors.get(op.list_id)
        if target.kind is NodeKind.TABLE and first is not None:
            same = (
                first.separator == op.separator
                and first.headers == op.headers
                and first.default == op.default
            )
            self._alias_refactor(op, first, target)
            if same:
                return []
            resolution = yield from self._conflict(
                "concurrent-set-value",
                op.list_id,
                ConflictOption(
                    "keep the first refactoring's format",
                    {"headers": list(first.headers), "separator": first.separator},
                ),
                ConflictOption(
                    "adopt this refactoring's format",
                    {"headers": list(op.headers), "separator": op.separator},
                ),
            )
            if resolution.choice == "take-a":
                return []
            return self._adopt_refactor_format(op, first, target, second_view)
        skip = ConflictOption(
            f"skip the refactoring: node is now {target.kind.value}"
        )
        yield from self._conflict("concurrent-set-value", op.list_id, skip, skip)
        return []

    def _alias_refactor(
        self, mine: RefactorListToTable, theirs: RefactorListToTable, table: Node
    ) -> None:
        """Point the second refactoring's minted ids at the surviving nodes
        so its follow-up edits (cell values, header tweaks) land correctly."""
        my_wrap = next(
            p for p in mine.expansion if isinstance(p, WrapChildren)
        )
        their_wrap = next(
            p for p in theirs.expansion if isinstance(p, WrapChildren)
        )
        self.alias[my_wrap.wrapper_id] = their_wrap.wrapper_id
        my_header = next(
            p for p in mine.expansion if isinstance(p, InsertNode)
        )
        header_row = next(
            (c for c in table.children if c.kind is NodeKind.TABLE_ROW), None
        )
        if header_row is not None:
            self.alias[my_header.spec.new_id] = header_row.id
            for cell_spec, cell in zip(my_header.spec.children, header_row.children):
                self.alias[cell_spec.new_id] = cell.id
        rows = {
            row.id: row
            for child in table.children
            if child.kind is NodeKind.TABLE_BODY
            for row in child.children
        }
        for prim in mine.expansion:
            if isinstance(prim, SplitValue) and prim.target in rows:
                for mine_cell, theirs_cell in zip(
                    prim.cell_ids, rows[prim.target].children
                ):
                    self.alias[mine_cell] = theirs_cell.id
        my_cols = [p for p in mine.expansion if isinstance(p, AddColumn)]
        their_cols = [p for p in theirs.expansion if isinstance(p, AddColumn)]
        for my_col, their_col in zip(my_cols, their_cols):
            theirs_map = dict(their_col.cell_ids)
            for row_id, cell_id in my_col.cell_ids:
                row_id = self.alias.get(row_id, row_id)
                if row_id in theirs_map:
                    self.alias[cell_id] = theirs_map[row_id]

    def _adopt_refactor_format(
        self,
        mine: RefactorListToTable,
        theirs: RefactorListToTable,
        table: Node,
        second_view: Document,
    ) -> list[EditOp]:
        """take-b on concurrent refactorings with different parameters: keep
        the first structure, impose the second's headers, separator, and any
        extra columns."""
        ops: list[EditOp] = []
        header_row = next(
            (c for c in table.children if c.kind is NodeKind.TABLE_ROW), None
        )
        if header_row is not None:
            for cell, header in zip(header_row.children, mine.headers):
                if cell.text != header:
                    ops.append(SetValue(cell.id, header, cell.text or ""))
        rows = [
            row
            for child in table.children
            if child.kind is NodeKind.TABLE_BODY
            for row in child.children
        ]
        if mine.separator != theirs.separator:
            for row in rows:
                original = second_view.find(row.id)
                if original is None or original.text is None:
                    continue
                first, second = split_text(original.text, mine.separator)
                if len(row.children) >= 2:
                    ops.append(SetValue(row.children[0].id, first,
                                        row.children[0].text or ""))
                    ops.append(SetValue(row.children[1].id, second,
                                        row.children[1].text or ""))
        if len(mine.headers) > len(theirs.headers) and header_row is not None:
            for extra_index, header in enumerate(
                mine.headers[len(theirs.headers):]
            ):
                column = len(header_row.children) + extra_index
                cell_ids = [(header_row.id, mint_cell_id(header_row.id, column))]
                cell_ids.extend((row.id, mint_cell_id(row.id, column)) for row in rows)
                ops.append(
                    AddColumn(table.id, header, mine.default, tuple(cell_ids))
                )
        return ops

    # -- formula rewriting through the first log

    def _rewrite_formula_source(self, source: str, site: NodeId):
        try:
            ast = parse_formula(source)
        except FormulaSyntaxError:
            return source
        results: list[RewriteResult] = []

        def rewriter(sel: Selector) -> Selector:
            result = rewrite_through(sel, self.facts.steps)
            results.append(result)
            return result.selector

        rewritten = print_formula(rewrite_ast(ast, rewriter))
        inexact = [r for r in results if not r.exact]
        if not inexact:
            return rewritten
        reason = inexact[0].reason or "structural change is ambiguous"
        resolution = yield from self._conflict(
            "formula-rewrite-ambiguous",
            site,
            ConflictOption(
                f"use the best-effort rewrite ({reason})", rewritten
            ),
            ConflictOption("keep the original formula", source),
        )
        if resolution.choice == "take-a":
            return rewritten
        if resolution.choice == "custom":
            return str(resolution.payload)
        return source

    def _rewrite_spec_formulas(self, spec: NodeSpec):
        formula = spec.formula
        if formula is not None:
            formula = yield from self._rewrite_formula_source(formula, spec.new_id)
        children = []
        for child in spec.children:
            children.append((yield from self._rewrite_spec_formulas(child)))
        return replace(spec, formula=formula, children=tuple(children))


# ---------------------------------------------------------------------------
# Helpers


def _op_site(op: EditOp) -> NodeId:
    for attr in ("target", "parent", "table", "list_id"):
        value = getattr(op, attr, None)
        if isinstance(value, NodeId):
            return value
    return NodeId("?", 0)


def _key_payload(op: SortChildren) -> dict[str, Any]:
    return {
        "mode": op.key.mode,
        "ascending": op.key.ascending,
        "caseInsensitive": op.key.case_insensitive,
    }


def _node_to_spec(node: Node) -> NodeSpec:
    return NodeSpec(
        kind=node.kind,
        new_id=node.id,
        user_id=node.user_id,
        text=node.text,
        formula=node.formula,
        children=tuple(_node_to_spec(c) for c in node.children),
    )


def _strip_user_ids(spec: NodeSpec, drop: set[str]) -> NodeSpec:
    user_id = None if spec.user_id in drop else spec.user_id
    return replace(
        spec,
        user_id=user_id,
        children=tuple(_strip_user_ids(c, drop) for c in spec.children),
    )


def _map_position(
    container: Node,
    recorded_parent: NodeId,
    position: int,
    second_view: Document,
    alias: dict[NodeId, NodeId],
) -> int:
    """Map a recorded insert position into the merged container by anchoring
    on the sibling it was recorded before."""
    view_parent = second_view.find(recorded_parent)
    current_ids = [c.id for c in container.children]
    if view_parent is None:
        return min(position, len(current_ids))
    anchors = [c.id for c in view_parent.children[position:]]
    for anchor in anchors:
        anchor = alias.get(anchor, anchor)
        if anchor in current_ids:
            return current_ids.index(anchor)
    return len(current_ids)


def _column_defaults(
    table: Node, refactor: RefactorListToTable, facts: _FirstLogFacts
) -> list[str]:
    """Default texts for columns beyond the two split cells, in order."""
    defaults = [refactor.default for _ in refactor.headers[2:]]
    for col in facts.add_columns.get(table.id, []):
        in_expansion = any(
            col is prim for prim in refactor.expansion
        )
        if not in_expansion:
            defaults.append(col.default)
    return defaults


def _reexpand_refactor(op: RefactorListToTable, target: Node) -> RefactorListToTable:
    """Re-derive the refactoring's expansion over the container's current
    children: recorded ids are kept for rows the author saw, deterministic
    ids are minted for rows concurrent edits added."""
    recorded_splits = {
        p.target: p for p in op.expansion if isinstance(p, SplitValue)
    }
    recorded_cols = [p for p in op.expansion if isinstance(p, AddColumn)]
    wrap = next(p for p in op.expansion if isinstance(p, WrapChildren))
    header_insert = next(p for p in op.expansion if isinstance(p, InsertNode))

    rows = [c for c in target.children]
    prims: list[PrimitiveEdit] = [
        ChangeNodeKind(op.list_id, NodeKind.LIST, NodeKind.TABLE),
        WrapChildren(op.list_id, NodeKind.TABLE_BODY, wrap.wrapper_id),
    ]
    prims.extend(
        ChangeNodeKind(row.id, NodeKind.LIST_ITEM, NodeKind.TABLE_ROW)
        for row in rows
        if row.kind is NodeKind.LIST_ITEM
    )
    for row in rows:
        if row.text is None:
            continue
        recorded = recorded_splits.get(row.id)
        cell_ids = (
            recorded.cell_ids
            if recorded is not None
            else (mint_cell_id(row.id, 0), mint_cell_id(row.id, 1))
        )
        prims.append(
            SplitValue(row.id, op.separator, NodeKind.TABLE_CELL, cell_ids)
        )
    prims.append(header_insert)
    header_row_id = header_insert.spec.new_id
    for index, col in enumerate(recorded_cols):
        recorded_cells = dict(col.cell_ids)
        cell_ids = [(header_row_id, recorded_cells.get(header_row_id)
                     or mint_cell_id(header_row_id, 2 + index))]
        for row in rows:
            cell = recorded_cells.get(row.id) or mint_cell_id(row.id, 2 + index)
            cell_ids.append((row.id, cell))
        prims.append(replace(col, cell_ids=tuple(cell_ids)))
    return replace(op, expansion=tuple(prims))


def _dealias(op: EditOp, alias: dict[NodeId, NodeId]) -> EditOp:
    if not alias:
        return op

    def a(node_id: NodeId) -> NodeId:
        return alias.get(node_id, node_id)

    if isinstance(op, InsertNode):
        return replace(op, parent=a(op.parent))
    if isinstance(op, RemoveNode):
        return replace(op, target=a(op.target))
    if isinstance(op, (SetValue, SetFormula, ChangeNodeKind)):
        return replace(op, target=a(op.target))
    if isinstance(op, WrapChildren):
        return replace(op, target=a(op.target))
    if isinstance(op, SplitValue):
        return replace(op, target=a(op.target))
    if isinstance(op, SortChildren):
        return replace(
            op,
            target=a(op.target),
            permutation=tuple(a(i) for i in op.permutation),
        )
    if isinstance(op, AddColumn):
        return replace(
            op,
            table=a(op.table),
            cell_ids=tuple((a(r), c) for r, c in op.cell_ids),
        )
    if isinstance(op, RefactorListToTable):
        return replace(op, list_id=a(op.list_id))
    return op


def _accumulate_dirty(base: Document, applied: Iterable[EditOp]) -> set[NodeId]:
    dirty: set[NodeId] = set()
    doc = base
    for op in applied:
        dirty |= dirty_set(doc, op)
        doc = apply_edit(doc, op)
    return dirty


# ---------------------------------------------------------------------------
# Entry points


def transform(
    edit: EditOp, against: EditOp, ctx: Document
) -> tuple[tuple[EditOp, ...] | None, Conflict | None]:
    """Pairwise transform: how ``edit`` applies after ``against`` has been
    applied to ``ctx``. Returns the transformed edit sequence (possibly
    empty when the intent is already satisfied), or the unresolved conflict
    when the pair cannot be reconciled automatically. Both edits must be
    applicable to ``ctx``."""
    base_version = version_hash(ctx)
    log_first = EditLog(base_version, "0-against", (LogEntry(against, 1),))
    log_second = EditLog(base_version, "1-edit", (LogEntry(edit, 1),))
    session = MergeSession(ctx, log_first, log_second)
    step = session.start()
    if isinstance(step, Conflict):
        session.abort()
        return None, step
    return step.applied[1:], None


def merge(
    base: Document, log_a: EditLog, log_b: EditLog, resolver: Resolver
) -> MergeOutcome:
    """Deterministic two-log merge; every conflict goes to the resolver."""
    session = MergeSession(base, log_a, log_b)
    step = session.start()
    while isinstance(step, Conflict):
        step = session.provide(resolver.resolve(step))
    return step


def merge_interactive(
    base: Document, log_a: EditLog, log_b: EditLog, channel: PromptChannel
) -> MergeOutcome:
    """Like merge, but conflicts are sent over a prompt channel; a closed
    channel aborts with an incomplete outcome (no document published)."""
    session = MergeSession(base, log_a, log_b)
    step = session.start()
    while isinstance(step, Conflict):
        answer = channel.ask(step)
        if answer is None:
            return session.abort()
        step = session.provide(answer)
    return step
