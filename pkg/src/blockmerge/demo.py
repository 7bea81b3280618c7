"""The conference-organizer scenario: documents, edit logs, and fixtures.

Builds the initial two-heading-plus-speaker-list document, the two
organizers' edit logs (add-and-sort versus refactor-into-table, plus the
budget section with computed values), and every derived document the demo
and the acceptance suite compare against golden fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .edits import apply_edit, derive_permutation, expand_refactor_list_to_table
from .merge import PolicyResolver, merge
from .model import (
    Document,
    IdAllocator,
    NodeId,
    NodeKind,
    create_document,
    render,
)
from .ops import (
    AddColumn,
    EditLog,
    EditOp,
    InsertNode,
    LogEntry,
    NodeSpec,
    SetValue,
    SortChildren,
    SortKey,
)
from .persistence import save_document, save_log, version_hash

SPEAKERS = [
    "Adele Goldberg, adele@xerox.com",
    "Margaret Hamilton, hamilton@mit.com",
    "Betty Jean Jennings, betty@rand.com",
]
NEW_SPEAKER = "Ada Lovelace, lovelace@rsoc.ac.uk"
HEADERS = ["Name", "Email", "Organizer"]
ORGANIZERS = {"Adele": "TP", "Margaret": "JE", "Betty": "JE"}

COUNT_FORMULA = "=COUNT(/ul[id='speakers']/li)"
EXPENSES_FORMULA = "=/dl/dd[0] * /dl/dd[1]"


@dataclass
class BaseHandles:
    doc: Document
    speakers_list: NodeId
    items: list[NodeId]  # Adele, Margaret, Betty


def build_base() -> BaseHandles:
    """The initial conference document (two headings and the speaker list)."""
    doc = create_document("base")
    alloc = IdAllocator(doc, "base")  # the root holds counter 0
    root = doc.root.id

    def insert(d: Document, parent: NodeId, pos: int, spec: NodeSpec) -> Document:
        return apply_edit(d, InsertNode(parent, pos, spec))

    doc = insert(
        doc, root, 0,
        NodeSpec(NodeKind.HEADING, alloc.fresh(), text="PROGRAMMING CONFERENCE 2023"),
    )
    doc = insert(
        doc, root, 1,
        NodeSpec(NodeKind.HEADING, alloc.fresh(), text="Invited speakers"),
    )
    speakers = alloc.fresh()
    doc = insert(doc, root, 2, NodeSpec(NodeKind.LIST, speakers, user_id="speakers"))
    items = []
    for position, text in enumerate(SPEAKERS):
        item = alloc.fresh()
        items.append(item)
        doc = insert(doc, speakers, position,
                     NodeSpec(NodeKind.LIST_ITEM, item, text=text))
    return BaseHandles(doc=doc, speakers_list=speakers, items=items)


def _log(base: Document, replica: str, ops: list[EditOp]) -> EditLog:
    return EditLog(
        base_version=version_hash(base),
        replica=replica,
        entries=tuple(LogEntry(op=op, ts=ts) for ts, op in enumerate(ops, start=1)),
    )


def _sorted_insert_ops(handles: BaseHandles, alloc: IdAllocator) -> list[EditOp]:
    """Add the new speaker, then sort the list by first name: the first
    organizer's edits."""
    ada = alloc.fresh()
    insert = InsertNode(
        parent=handles.speakers_list,
        position=len(handles.items),
        spec=NodeSpec(NodeKind.LIST_ITEM, ada, text=NEW_SPEAKER),
    )
    view = apply_edit(handles.doc, insert)
    container = view.find(handles.speakers_list)
    assert container is not None
    key = SortKey(mode="first-word", ascending=True, case_insensitive=True)
    sort = SortChildren(
        target=handles.speakers_list,
        key=key,
        permutation=derive_permutation(container, key),
    )
    return [insert, sort]


def _refactor_ops(doc: Document, handles: BaseHandles, alloc: IdAllocator) -> list[EditOp]:
    """Refactor the list into the three-column table and fill the Organizer
    cells: the second organizer's edits."""
    composite = expand_refactor_list_to_table(
        doc, handles.speakers_list, ",", HEADERS, "", alloc
    )
    organizer_col = next(p for p in composite.expansion if isinstance(p, AddColumn))
    ops: list[EditOp] = [composite]
    view = apply_edit(doc, composite)
    tbody = next(
        c
        for c in view.find(handles.speakers_list).children
        if c.kind is NodeKind.TABLE_BODY
    )
    for row in tbody.children:
        first_name = (row.children[0].text or "").split()[0]
        initials = ORGANIZERS.get(first_name)
        if initials is None:
            continue
        cell = organizer_col.cell_for(row.id)
        assert cell is not None
        ops.append(SetValue(cell, initials, ""))
    return ops


def build_org1_s4_log(handles: BaseHandles) -> EditLog:
    alloc = IdAllocator(handles.doc, "org1")
    return _log(handles.doc, "org1", _sorted_insert_ops(handles, alloc))


def build_org2_s4_log(handles: BaseHandles) -> EditLog:
    alloc = IdAllocator(handles.doc, "org2")
    return _log(handles.doc, "org2", _refactor_ops(handles.doc, handles, alloc))


def build_org1_s5_log(handles: BaseHandles) -> EditLog:
    """The first organizer's §5 edits: everything that turns the initial
    document into the merged table (insert, sort, refactor, fill cells)."""
    alloc = IdAllocator(handles.doc, "org1")
    ops = _sorted_insert_ops(handles, alloc)
    doc = handles.doc
    for op in ops:
        doc = apply_edit(doc, op)
    ops.extend(_refactor_ops(doc, handles, alloc))
    return _log(handles.doc, "org1", ops)


def build_budget_log(handles: BaseHandles) -> EditLog:
    """The second organizer's budget section: a heading plus a definition
    list holding the fixed cost and the two computed values."""
    alloc = IdAllocator(handles.doc, "org2")
    root = handles.doc.root.id
    dl = NodeId("org2", 0)
    ops: list[EditOp] = []

    def insert(parent: NodeId, pos: int, spec: NodeSpec) -> None:
        ops.append(InsertNode(parent, pos, spec))

    dl = alloc.fresh()
    insert(root, 3, NodeSpec(NodeKind.HEADING, alloc.fresh(), text="Conference budget"))
    insert(root, 4, NodeSpec(NodeKind.DEF_LIST, dl))
    insert(dl, 0, NodeSpec(NodeKind.DEF_TERM, alloc.fresh(),
                           text="Travel cost per speaker:"))
    insert(dl, 1, NodeSpec(NodeKind.DEF_VALUE, alloc.fresh(), text="$1200"))
    insert(dl, 2, NodeSpec(NodeKind.DEF_TERM, alloc.fresh(),
                           text="Number of speakers:"))
    dd_count = alloc.fresh()
    insert(dl, 3, NodeSpec(NodeKind.DEF_VALUE, dd_count))
    insert(dd_count, 0, NodeSpec(NodeKind.COMPUTED, alloc.fresh(),
                                 formula=COUNT_FORMULA))
    insert(dl, 4, NodeSpec(NodeKind.DEF_TERM, alloc.fresh(),
                           text="Travel expenses:"))
    dd_expenses = alloc.fresh()
    insert(dl, 5, NodeSpec(NodeKind.DEF_VALUE, dd_expenses))
    insert(dd_expenses, 0, NodeSpec(NodeKind.COMPUTED, alloc.fresh(),
                                    formula=EXPENSES_FORMULA))
    return _log(handles.doc, "org2", ops)


def _replay(base: Document, log: EditLog) -> Document:
    doc = base
    for entry in log.entries:
        doc = apply_edit(doc, entry.op)
    return doc


def build_figures() -> dict[str, Document]:
    """fig2 through fig7, freshly derived from the base and the logs."""
    handles = build_base()
    base = handles.doc
    org1_s4 = build_org1_s4_log(handles)
    org2_s4 = build_org2_s4_log(handles)
    org1_s5 = build_org1_s5_log(handles)
    budget = build_budget_log(handles)
    resolver = PolicyResolver("a")
    fig5 = merge(base, org1_s4, org2_s4, resolver)
    fig7 = merge(base, org1_s5, budget, resolver)
    assert fig5.document is not None and fig7.document is not None
    return {
        "fig2": base,
        "fig3": _replay(base, org1_s4),
        "fig4": _replay(base, org2_s4),
        "fig5": fig5.document,
        "fig6": _replay(base, budget),
        "fig7": fig7.document,
    }


def build_logs() -> dict[str, EditLog]:
    handles = build_base()
    return {
        "org1_s4": build_org1_s4_log(handles),
        "org2_s4": build_org2_s4_log(handles),
        "org1_s5": build_org1_s5_log(handles),
        "org2_budget": build_budget_log(handles),
    }


FIGURE_NAMES = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"]
LOG_NAMES = ["org1_s4", "org2_s4", "org1_s5", "org2_budget"]


def write_fixtures(directory: str | Path) -> list[str]:
    """Write every figure snapshot, golden render, and demo log."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    for name, doc in build_figures().items():
        save_document(doc, path / f"{name}.json")
        (path / f"{name}.txt").write_text(render(doc) + "\n", encoding="utf-8")
        written.extend([f"{name}.json", f"{name}.txt"])
    for name, log in build_logs().items():
        save_log(log, path / f"{name}.log")
        written.append(f"{name}.log")
    return written
