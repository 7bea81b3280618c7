"""Application semantics for edit operations.

``apply_edit`` returns a new document; the input is never mutated. Applying
any edit also rewrites the selectors of every formula already in the
document through that edit, which is how a refactoring updates the code of
resident equations. Composite edits apply as the fold of their expansion
and are validated as one atomic unit (their intermediate states may pass
through illegal parent/child shapes).
"""

from __future__ import annotations

from .model import (
    Document,
    InvariantViolation,
    Node,
    NodeId,
    NodeKind,
    TEXTUAL_KINDS,
    check_invariants,
)
from .formulas import (
    FormulaSyntaxError,
    canonicalize,
    parse_formula,
    print_formula,
    rewrite_ast,
)
from .ops import (
    AddColumn,
    ChangeNodeKind,
    EditOp,
    InsertNode,
    NodeSpec,
    PrimitiveEdit,
    RefactorListToTable,
    RemoveNode,
    SetFormula,
    SetValue,
    SortChildren,
    SortKey,
    SplitValue,
    WrapChildren,
    created_ids,
    expand,
)
from .selectors import rewrite_selector


class EditError(Exception):
    """An edit cannot be applied; ``code`` is the machine-readable reason."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


def validate(doc: Document, op: EditOp) -> str | None:
    """None iff ``apply_edit`` would succeed, else the rejection code."""
    try:
        apply_edit(doc, op)
    except EditError as exc:
        return exc.code
    except InvariantViolation:
        return "kind-illegal"
    return None


def apply_edit(doc: Document, op: EditOp) -> Document:
    """Apply one edit (primitive or composite) and return the new document."""
    new_doc = doc.clone()
    if isinstance(op, RefactorListToTable):
        for prim in op.expansion:
            _apply_primitive(new_doc, prim)
    else:
        _apply_primitive(new_doc, op)
    check_invariants(new_doc)
    return new_doc


def apply_log_ops(doc: Document, ops: list[EditOp]) -> Document:
    for op in ops:
        doc = apply_edit(doc, op)
    return doc


def _apply_primitive(doc: Document, prim: PrimitiveEdit) -> None:
    """Mutate ``doc`` in place with one primitive, then rewrite resident
    formulas through it. ``doc`` must already be a private clone."""
    pre = doc.clone()
    skip: set[NodeId] = set()
    if isinstance(prim, InsertNode):
        _do_insert(doc, prim)
        skip = set(prim.spec.walk_ids())
    elif isinstance(prim, RemoveNode):
        _do_remove(doc, prim)
    elif isinstance(prim, SetValue):
        _do_set_value(doc, prim)
    elif isinstance(prim, SetFormula):
        _do_set_formula(doc, prim)
        skip = {prim.target}
    elif isinstance(prim, ChangeNodeKind):
        _do_change_kind(doc, prim)
    elif isinstance(prim, WrapChildren):
        _do_wrap(doc, prim)
    elif isinstance(prim, SplitValue):
        _do_split(doc, prim)
    elif isinstance(prim, SortChildren):
        _do_sort(doc, prim)
    elif isinstance(prim, AddColumn):
        _do_add_column(doc, prim)
    else:
        raise EditError("unknown-op", f"cannot apply {prim!r}")
    _maintain_formulas(pre, doc, prim, skip)


def _require(doc: Document, node_id: NodeId, code: str = "missing-target") -> Node:
    node = doc.find(node_id)
    if node is None:
        raise EditError(code, f"no such node: {node_id}")
    return node


def _check_fresh_ids(doc: Document, ids: list[NodeId]) -> None:
    existing = {n.id for n in doc.walk()}
    for node_id in ids:
        if node_id in existing:
            raise EditError("duplicate-node-id", f"id {node_id} already in use")


def build_node(spec: NodeSpec) -> Node:
    """Construct the subtree an InsertNode describes; formula sources are
    stored in canonical form."""
    formula = spec.formula
    if spec.kind is NodeKind.COMPUTED:
        if formula is None:
            raise EditError("formula-syntax", "computed value needs a formula")
        try:
            formula = canonicalize(formula)
        except FormulaSyntaxError as exc:
            raise EditError("formula-syntax", str(exc)) from exc
    elif formula is not None:
        raise EditError("formula-syntax", f"{spec.kind} cannot hold a formula")
    return Node(
        id=spec.new_id,
        kind=spec.kind,
        user_id=spec.user_id,
        text=spec.text,
        formula=formula,
        children=[build_node(c) for c in spec.children],
    )


def _do_insert(doc: Document, prim: InsertNode) -> None:
    parent = _require(doc, prim.parent)
    if not 0 <= prim.position <= len(parent.children):
        raise EditError(
            "bad-position",
            f"position {prim.position} outside 0..{len(parent.children)}",
        )
    _check_fresh_ids(doc, prim.spec.walk_ids())
    existing_user_ids = {n.user_id for n in doc.walk() if n.user_id is not None}
    node = build_node(prim.spec)
    for sub in node.walk():
        if sub.user_id is not None and sub.user_id in existing_user_ids:
            raise EditError(
                "duplicate-user-id", f"user id {sub.user_id!r} already in use"
            )
    parent.children.insert(prim.position, node)
    for node_id in prim.spec.walk_ids():
        doc.note_minted(node_id)


def _do_remove(doc: Document, prim: RemoveNode) -> None:
    if prim.target == doc.root.id:
        raise EditError("root-target", "cannot remove the document root")
    located = doc.parent_of(prim.target)
    if located is None:
        raise EditError("missing-target", f"no such node: {prim.target}")
    parent, index = located
    del parent.children[index]


def _do_set_value(doc: Document, prim: SetValue) -> None:
    target = _require(doc, prim.target)
    if target.kind not in TEXTUAL_KINDS or target.children:
        raise EditError(
            "not-textual", f"{target.kind} node {target.id} holds no editable text"
        )
    target.text = prim.new_text


def _do_set_formula(doc: Document, prim: SetFormula) -> None:
    target = _require(doc, prim.target)
    if target.kind is not NodeKind.COMPUTED:
        raise EditError("not-computed", f"node {target.id} is {target.kind}")
    try:
        target.formula = canonicalize(prim.new_source)
    except FormulaSyntaxError as exc:
        raise EditError("formula-syntax", str(exc)) from exc
    target.cached = None


def _do_change_kind(doc: Document, prim: ChangeNodeKind) -> None:
    target = _require(doc, prim.target)
    if target.id == doc.root.id:
        raise EditError("root-target", "cannot re-kind the document root")
    if target.kind is not prim.from_kind:
        raise EditError(
            "stale-from-kind",
            f"node {target.id} is {target.kind}, not {prim.from_kind}",
        )
    target.kind = prim.to_kind


def _do_wrap(doc: Document, prim: WrapChildren) -> None:
    target = _require(doc, prim.target)
    _check_fresh_ids(doc, [prim.wrapper_id])
    wrapper = Node(id=prim.wrapper_id, kind=prim.wrapper_kind, children=target.children)
    target.children = [wrapper]
    doc.note_minted(prim.wrapper_id)


def _do_split(doc: Document, prim: SplitValue) -> None:
    target = _require(doc, prim.target)
    if target.text is None:
        raise EditError("split-non-leaf", f"node {target.id} has no text to split")
    if not prim.separator:
        raise EditError("bad-separator", "separator must be non-empty")
    _check_fresh_ids(doc, list(prim.cell_ids))
    first, second = split_text(target.text, prim.separator)
    target.children = [
        Node(id=prim.cell_ids[0], kind=prim.cell_kind, text=first),
        Node(id=prim.cell_ids[1], kind=prim.cell_kind, text=second),
    ]
    target.text = None
    for cell_id in prim.cell_ids:
        doc.note_minted(cell_id)


def split_text(text: str, separator: str) -> tuple[str, str]:
    """Split on the first separator occurrence, trimming both parts; text
    without the separator yields (text, '')."""
    first, _, second = text.partition(separator)
    return first.strip(), second.strip()


def _do_sort(doc: Document, prim: SortChildren) -> None:
    target = _require(doc, prim.target)
    current = [c.id for c in target.children]
    if sorted(prim.permutation) != sorted(current):
        raise EditError(
            "stale-permutation",
            f"permutation covers {len(prim.permutation)} ids, container has "
            f"{len(current)}",
        )
    by_id = {c.id: c for c in target.children}
    target.children = [by_id[node_id] for node_id in prim.permutation]


def _do_add_column(doc: Document, prim: AddColumn) -> None:
    table = _require(doc, prim.table)
    if table.kind is not NodeKind.TABLE:
        raise EditError("kind-illegal", f"node {table.id} is {table.kind}, not a table")
    header_row = next(
        (c for c in table.children if c.kind is NodeKind.TABLE_ROW), None
    )
    if header_row is None:
        raise EditError("missing-header-row", f"table {table.id} has no header row")
    rows = [
        row
        for child in table.children
        if child.kind is NodeKind.TABLE_BODY
        for row in child.children
    ]
    _check_fresh_ids(doc, [cid for _, cid in prim.cell_ids])
    for row, text in [(header_row, prim.header)] + [(r, prim.default) for r in rows]:
        cell_id = prim.cell_for(row.id)
        if cell_id is None:
            raise EditError(
                "stale-column-map", f"no cell id recorded for row {row.id}"
            )
        row.children.append(Node(id=cell_id, kind=NodeKind.TABLE_CELL, text=text))
        doc.note_minted(cell_id)


# ---------------------------------------------------------------------------
# Resident formula maintenance


def _maintain_formulas(
    pre: Document, post: Document, prim: PrimitiveEdit, skip: set[NodeId]
) -> None:
    """Rewrite the selectors of every formula already present through the
    edit just applied. Nodes the edit itself introduced keep their sources:
    they were written against the post-edit document."""
    for node in post.walk():
        if node.kind is not NodeKind.COMPUTED or node.id in skip:
            continue
        try:
            ast = parse_formula(node.formula or "")
        except FormulaSyntaxError:
            continue
        rewritten = rewrite_ast(
            ast, lambda sel: rewrite_selector(sel, prim, pre).selector
        )
        source = print_formula(rewritten)
        if source != node.formula:
            node.formula = source
            node.cached = None


# ---------------------------------------------------------------------------
# Sorting helpers


def leaf_text(node: Node) -> str:
    """The first textual content under a node, used as its sort key basis.
    Works identically before and after a row is split into cells."""
    if node.text is not None:
        return node.text
    if node.kind is NodeKind.COMPUTED:
        return node.cached if node.cached is not None else (node.formula or "")
    for child in node.children:
        text = leaf_text(child)
        if text:
            return text
    return ""


def sort_key_value(node: Node, key: SortKey) -> str:
    text = leaf_text(node)
    if key.mode == "first-word":
        words = text.split()
        text = words[0] if words else ""
    if key.case_insensitive:
        text = text.casefold()
    return text


def derive_permutation(container: Node, key: SortKey) -> tuple[NodeId, ...]:
    """The child order the declarative key produces right now (stable)."""
    ordered = sorted(
        container.children,
        key=lambda c: sort_key_value(c, key),
        reverse=not key.ascending,
    )
    return tuple(c.id for c in ordered)


# ---------------------------------------------------------------------------
# The list-to-table refactoring


def expand_refactor_list_to_table(
    doc: Document,
    list_id: NodeId,
    separator: str,
    headers: list[str],
    default: str,
    alloc,
) -> RefactorListToTable:
    """Record the four-step refactoring against the current document: re-kind
    the list to a table, wrap its items in a tbody, re-kind every item to a
    row, split each row's text into two cells, install the header row, and
    add one column per extra header. The table keeps the list's NodeId and
    user-visible id."""
    target = doc.find(list_id)
    if target is None:
        raise EditError("missing-target", f"no such node: {list_id}")
    if target.kind is not NodeKind.LIST:
        raise EditError("kind-illegal", f"node {list_id} is {target.kind}, not a list")
    if len(headers) < 2:
        raise EditError("bad-headers", "need at least two headers (the split parts)")
    if not separator:
        raise EditError("bad-separator", "separator must be non-empty")

    rows = [c.id for c in target.children]
    prims: list[PrimitiveEdit] = [
        ChangeNodeKind(list_id, NodeKind.LIST, NodeKind.TABLE),
        WrapChildren(list_id, NodeKind.TABLE_BODY, alloc.fresh()),
    ]
    prims.extend(
        ChangeNodeKind(row, NodeKind.LIST_ITEM, NodeKind.TABLE_ROW) for row in rows
    )
    prims.extend(
        SplitValue(row, separator, NodeKind.TABLE_CELL, (alloc.fresh(), alloc.fresh()))
        for row in rows
    )
    header_row_id = alloc.fresh()
    header_spec = NodeSpec(
        kind=NodeKind.TABLE_ROW,
        new_id=header_row_id,
        children=tuple(
            NodeSpec(kind=NodeKind.TABLE_CELL, new_id=alloc.fresh(), text=h)
            for h in headers[:2]
        ),
    )
    prims.append(InsertNode(parent=list_id, position=0, spec=header_spec))
    for header in headers[2:]:
        cell_ids = [(header_row_id, alloc.fresh())]
        cell_ids.extend((row, alloc.fresh()) for row in rows)
        prims.append(AddColumn(list_id, header, default, tuple(cell_ids)))
    return RefactorListToTable(
        list_id=list_id,
        separator=separator,
        headers=tuple(headers),
        default=default,
        expansion=tuple(prims),
    )


# ---------------------------------------------------------------------------
# Touched-node accounting (feeds dirty-set computation)


def touched_ids(doc: Document, op: EditOp) -> set[NodeId]:
    """Nodes whose content or placement the edit affects, plus everything it
    creates or removes; a conservative superset."""
    touched: set[NodeId] = set(created_ids(op))
    for prim in expand(op):
        if isinstance(prim, InsertNode):
            touched.add(prim.parent)
        elif isinstance(prim, RemoveNode):
            node = doc.find(prim.target)
            if node is not None:
                touched.update(n.id for n in node.walk())
            located = doc.parent_of(prim.target)
            if located is not None:
                touched.add(located[0].id)
        elif isinstance(prim, (SetValue, SetFormula, ChangeNodeKind, SortChildren)):
            touched.add(prim.target)
        elif isinstance(prim, WrapChildren):
            touched.add(prim.target)
            node = doc.find(prim.target)
            if node is not None:
                touched.update(c.id for c in node.children)
        elif isinstance(prim, SplitValue):
            touched.add(prim.target)
        elif isinstance(prim, AddColumn):
            touched.add(prim.table)
            node = doc.find(prim.table)
            if node is not None:
                touched.update(n.id for n in node.walk())
    return touched
