"""Seeded generators for random documents, edits, logs, and selectors.

Everything is driven by an explicit ``random.Random`` so the acceptance
suites are reproducible; sizes stay desk-scale. Generated edits are always
applicable to the document they were drawn against (checked via validate),
and generated logs replay cleanly on their own replica.
"""

from __future__ import annotations

import random

from blockmerge.edits import (
    apply_edit,
    derive_permutation,
    expand_refactor_list_to_table,
    validate,
)
from blockmerge.model import (
    Document,
    IdAllocator,
    Node,
    NodeId,
    NodeKind,
    create_document,
)
from blockmerge.ops import (
    EditLog,
    EditOp,
    InsertNode,
    LogEntry,
    NodeSpec,
    PrimitiveEdit,
    RemoveNode,
    SetFormula,
    SetValue,
    SortChildren,
    SortKey,
    SplitValue,
)
from blockmerge.selectors import (
    KIND_TO_TAG,
    Selector,
    SelectorStep,
)
from blockmerge.persistence import version_hash

FIRST = ["Ada", "Adele", "Betty", "Margaret", "Grace", "Edith", "Radia", "Karen"]
LAST = ["Lovelace", "Goldberg", "Jennings", "Hamilton", "Hopper", "Clarke"]
LABELS = ["Travel:", "Venue:", "Catering:", "Printing:", "Registration:"]
HEADERS = [["Name", "Email"], ["Name", "Email", "Organizer"],
           ["Who", "Contact", "Notes", "Status"]]


class Gen:
    def __init__(self, seed: int) -> None:
        self.rng = random.Random(seed)

    # -- scalars

    def person(self) -> str:
        name = f"{self.rng.choice(FIRST)} {self.rng.choice(LAST)}"
        return f"{name}, {name.split()[0].lower()}@example.org"

    def money(self) -> str:
        return f"${self.rng.randrange(1, 50) * 100}"

    def words(self) -> str:
        return " ".join(self.rng.sample(FIRST, self.rng.randrange(1, 3)))

    def maybe_user_id(self) -> str | None:
        if self.rng.random() < 0.25:
            return f"u{self.rng.randrange(12)}"
        return None

    # -- documents

    def random_document(self, replica: str = "gen") -> Document:
        doc = create_document(replica)
        alloc = IdAllocator(doc, replica)  # the root holds counter 0
        root = doc.root.id

        def insert(d: Document, parent: NodeId, spec: NodeSpec) -> Document:
            node = d.find(parent)
            assert node is not None
            op = InsertNode(parent, len(node.children), spec)
            if validate(d, op) is None:
                return apply_edit(d, op)
            return d

        for _ in range(self.rng.randrange(1, 3)):
            doc = insert(doc, root,
                         NodeSpec(NodeKind.HEADING, alloc.fresh(), text=self.words()))
        if self.rng.random() < 0.9:
            ul = alloc.fresh()
            doc = insert(doc, root, NodeSpec(NodeKind.LIST, ul,
                                             user_id=f"l{self.rng.randrange(6)}"))
            for _ in range(self.rng.randrange(0, 4)):
                doc = insert(doc, ul, NodeSpec(NodeKind.LIST_ITEM, alloc.fresh(),
                                               text=self.person()))
        if self.rng.random() < 0.7:
            dl = alloc.fresh()
            doc = insert(doc, root, NodeSpec(NodeKind.DEF_LIST, dl))
            for _ in range(self.rng.randrange(1, 4)):
                doc = insert(doc, dl, NodeSpec(NodeKind.DEF_TERM, alloc.fresh(),
                                               text=self.rng.choice(LABELS)))
                if self.rng.random() < 0.8:
                    doc = insert(doc, dl, NodeSpec(NodeKind.DEF_VALUE, alloc.fresh(),
                                                   text=self.money()))
                else:
                    doc = insert(
                        doc, dl,
                        NodeSpec(
                            NodeKind.DEF_VALUE, alloc.fresh(),
                            children=(
                                NodeSpec(NodeKind.COMPUTED, alloc.fresh(),
                                         formula=self.random_formula(doc)),
                            ),
                        ),
                    )
        if self.rng.random() < 0.25:
            lists = [n for n in doc.walk() if n.kind is NodeKind.LIST and n.children]
            if lists:
                target = self.rng.choice(lists)
                composite = expand_refactor_list_to_table(
                    doc, target.id, ",", self.rng.choice(HEADERS), "", alloc
                )
                doc = apply_edit(doc, composite)
        return doc

    # -- formulas and selectors

    def random_formula(self, doc: Document) -> str:
        choices = ["count", "sum", "ref", "number", "binop"]
        kind = self.rng.choice(choices)
        if kind == "number":
            return f"={self.rng.randrange(1, 100)}"
        sel = self.random_selector(doc, prefer_existing=True)
        if kind == "count":
            return f"=COUNT({sel.source()})"
        if kind == "sum":
            return f"=SUM({sel.source()})"
        if kind == "ref":
            return f"={sel.source()}"
        other = self.random_selector(doc, prefer_existing=True)
        op = self.rng.choice(["+", "-", "*"])
        return f"={sel.source()} {op} {other.source()}"

    SELECTABLE = [
        NodeKind.HEADING, NodeKind.PARAGRAPH, NodeKind.LIST, NodeKind.LIST_ITEM,
        NodeKind.TABLE, NodeKind.TABLE_BODY, NodeKind.TABLE_ROW,
        NodeKind.TABLE_CELL, NodeKind.DEF_LIST, NodeKind.DEF_TERM,
        NodeKind.DEF_VALUE,
    ]

    def random_selector(self, doc: Document, prefer_existing: bool = True) -> Selector:
        """A selector drawn from the document's shape; usually resolves to
        something, occasionally deliberately misses."""
        candidates = [
            n for n in doc.walk()
            if n.kind in self.SELECTABLE and n.id != doc.root.id
        ]
        if not candidates or (prefer_existing and self.rng.random() < 0.05):
            return Selector((SelectorStep(NodeKind.LIST, user_id="nowhere"),))
        node = self.rng.choice(candidates)
        path: list[Node] = []
        cursor: Node | None = node
        while cursor is not None and cursor.id != doc.root.id:
            path.insert(0, cursor)
            located = doc.parent_of(cursor.id)
            cursor = located[0] if located else None
        steps = []
        parent = doc.root
        for part in path:
            steps.append(self._step_for(parent, part))
            parent = part
        return Selector(tuple(steps))

    def _step_for(self, parent: Node, node: Node) -> SelectorStep:
        roll = self.rng.random()
        if node.user_id is not None and roll < 0.4:
            return SelectorStep(node.kind, user_id=node.user_id)
        if roll < 0.7:
            kind_index = [c.id for c in parent.children
                          if c.kind is node.kind].index(node.id)
            return SelectorStep(node.kind, index=kind_index)
        return SelectorStep(node.kind)

    # -- edits

    def random_primitive(self, doc: Document, alloc: IdAllocator) -> PrimitiveEdit | None:
        """A standalone-applicable primitive edit, or None if the document
        offers nothing for the rolled action."""
        for _ in range(24):
            op = self._candidate(doc, alloc, composites=False)
            if op is not None and validate(doc, op) is None:
                return op  # type: ignore[return-value]
        return None

    def random_op(self, doc: Document, alloc: IdAllocator) -> EditOp | None:
        for _ in range(24):
            op = self._candidate(doc, alloc, composites=True)
            if op is not None and validate(doc, op) is None:
                return op
        return None

    def _candidate(self, doc: Document, alloc: IdAllocator, composites: bool):
        nodes = [n for n in doc.walk() if n.id != doc.root.id]
        actions = ["insert", "insert", "set-value", "set-value", "remove",
                   "sort", "split", "change-kind", "set-formula", "computed"]
        if composites:
            actions += ["refactor", "add-column-table"]
        action = self.rng.choice(actions)
        if action == "insert":
            return self._candidate_insert(doc, alloc)
        if action == "set-value":
            textual = [n for n in nodes if n.text is not None]
            if not textual:
                return None
            target = self.rng.choice(textual)
            if "," in (target.text or "") and self.rng.random() < 0.7:
                new = self.person()
            else:
                new = self.words()  # sometimes drops a separator on purpose
            return SetValue(target.id, new, target.text or "")
        if action == "remove":
            if not nodes:
                return None
            return RemoveNode(self.rng.choice(nodes).id)
        if action == "sort":
            lists = [n for n in nodes
                     if n.kind is NodeKind.LIST and len(n.children) > 1]
            if not lists:
                return None
            target = self.rng.choice(lists)
            key = SortKey("first-word", ascending=self.rng.random() < 0.8)
            return SortChildren(target.id, key, derive_permutation(target, key))
        if action == "split":
            items = [n for n in nodes
                     if n.kind is NodeKind.LIST_ITEM and n.text and "," in n.text]
            if not items:
                return None
            return SplitValue(self.rng.choice(items).id, ",", NodeKind.TABLE_CELL,
                              (alloc.fresh(), alloc.fresh()))
        if action == "change-kind":
            flips = {
                NodeKind.HEADING: NodeKind.PARAGRAPH,
                NodeKind.PARAGRAPH: NodeKind.HEADING,
                NodeKind.DEF_TERM: NodeKind.DEF_VALUE,
                NodeKind.DEF_VALUE: NodeKind.DEF_TERM,
            }
            flippable = [n for n in nodes if n.kind in flips and not n.children]
            if not flippable:
                return None
            target = self.rng.choice(flippable)
            return_kind = flips[target.kind]
            from blockmerge.ops import ChangeNodeKind

            return ChangeNodeKind(target.id, target.kind, return_kind)
        if action == "set-formula":
            computed = [n for n in nodes if n.kind is NodeKind.COMPUTED]
            if not computed:
                return None
            target = self.rng.choice(computed)
            return SetFormula(target.id, self.random_formula(doc),
                              target.formula or "")
        if action == "computed":
            def_lists = [n for n in nodes if n.kind is NodeKind.DEF_LIST]
            if not def_lists:
                return None
            dl = self.rng.choice(def_lists)
            dd = alloc.fresh()
            spec = NodeSpec(
                NodeKind.DEF_VALUE, dd,
                children=(NodeSpec(NodeKind.COMPUTED, alloc.fresh(),
                                   formula=self.random_formula(doc)),),
            )
            return InsertNode(dl.id, len(dl.children), spec)
        if action == "refactor":
            lists = [n for n in nodes if n.kind is NodeKind.LIST]
            if not lists:
                return None
            target = self.rng.choice(lists)
            try:
                return expand_refactor_list_to_table(
                    doc, target.id, ",", self.rng.choice(HEADERS), "", alloc
                )
            except Exception:
                return None
        if action == "add-column-table":
            from blockmerge.ops import AddColumn

            tables = [n for n in nodes if n.kind is NodeKind.TABLE]
            if not tables:
                return None
            table = self.rng.choice(tables)
            header_row = next(
                (c for c in table.children if c.kind is NodeKind.TABLE_ROW), None
            )
            if header_row is None:
                return None
            rows = [r for c in table.children if c.kind is NodeKind.TABLE_BODY
                    for r in c.children]
            cell_ids = [(header_row.id, alloc.fresh())]
            cell_ids.extend((r.id, alloc.fresh()) for r in rows)
            return AddColumn(table.id, self.words(), "", tuple(cell_ids))
        return None

    def _candidate_insert(self, doc: Document, alloc: IdAllocator):
        containers = []
        for n in doc.walk():
            if n.kind is NodeKind.DOCUMENT:
                containers.append((n, NodeKind.HEADING))
            elif n.kind is NodeKind.LIST:
                containers.append((n, NodeKind.LIST_ITEM))
            elif n.kind is NodeKind.DEF_LIST:
                containers.append((n, self.rng.choice(
                    [NodeKind.DEF_TERM, NodeKind.DEF_VALUE])))
            elif n.kind is NodeKind.TABLE_BODY:
                containers.append((n, NodeKind.TABLE_ROW))
        parent, kind = self.rng.choice(containers)
        position = self.rng.randrange(0, len(parent.children) + 1)
        if kind is NodeKind.LIST_ITEM:
            spec = NodeSpec(kind, alloc.fresh(), text=self.person(),
                            user_id=self.maybe_user_id())
        elif kind is NodeKind.TABLE_ROW:
            width = len(parent.children[0].children) if parent.children else 2
            spec = NodeSpec(
                kind, alloc.fresh(),
                children=tuple(
                    NodeSpec(NodeKind.TABLE_CELL, alloc.fresh(), text=self.words())
                    for _ in range(width)
                ),
            )
        elif kind is NodeKind.DEF_VALUE:
            spec = NodeSpec(kind, alloc.fresh(), text=self.money())
        else:
            spec = NodeSpec(kind, alloc.fresh(), text=self.words())
        return InsertNode(parent.id, position, spec)

    # -- logs

    def random_log(self, base: Document, replica: str, max_ops: int = 5) -> EditLog:
        alloc = IdAllocator(base, replica)
        doc = base
        entries: list[LogEntry] = []
        for ts in range(1, self.rng.randrange(1, max_ops + 1) + 1):
            op = self.random_op(doc, alloc)
            if op is None:
                break
            entries.append(LogEntry(op=op, ts=ts))
            doc = apply_edit(doc, op)
        return EditLog(version_hash(base), replica, tuple(entries))
