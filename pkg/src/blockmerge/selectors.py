"""Absolute path selectors over document trees: parse, resolve, rewrite.

A selector like ``/ul[id='speakers']/li`` denotes a node set. Rewriting maps
a selector through a structure edit so that it keeps denoting the images of
the same nodes afterwards; this is what lets formulas survive refactorings.

Rewrites are computed against the concrete pre-edit document. Where no
single path expression can denote the image (for example one of several
same-kind siblings is re-kinded), the result is flagged inexact instead of
silently misdirecting the reference; the merge engine turns such flags into
conflicts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import Document, Node, NodeId, NodeKind
from .ops import (
    AddColumn,
    ChangeNodeKind,
    InsertNode,
    PrimitiveEdit,
    RemoveNode,
    SetFormula,
    SetValue,
    SortChildren,
    SplitValue,
    WrapChildren,
)


class SelectorSyntaxError(ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (at offset {position})")
        self.position = position


#: Tags admitted by the selector grammar (computed values and the document
#: root are not addressable).
TAG_TO_KIND: dict[str, NodeKind] = {
    "ul": NodeKind.LIST,
    "li": NodeKind.LIST_ITEM,
    "table": NodeKind.TABLE,
    "tbody": NodeKind.TABLE_BODY,
    "tr": NodeKind.TABLE_ROW,
    "td": NodeKind.TABLE_CELL,
    "dl": NodeKind.DEF_LIST,
    "dt": NodeKind.DEF_TERM,
    "dd": NodeKind.DEF_VALUE,
    "heading": NodeKind.HEADING,
    "p": NodeKind.PARAGRAPH,
}

KIND_TO_TAG = {kind: tag for tag, kind in TAG_TO_KIND.items()}


@dataclass(frozen=True)
class SelectorStep:
    """One step: a tag plus at most one predicate. An index predicate counts
    kind-matching siblings only, so ``/dl/dd[0]`` skips interleaved dt nodes."""

    kind: NodeKind
    user_id: str | None = None
    index: int | None = None

    def source(self) -> str:
        tag = KIND_TO_TAG[self.kind]
        if self.user_id is not None:
            return f"{tag}[id='{self.user_id}']"
        if self.index is not None:
            return f"{tag}[{self.index}]"
        return tag


@dataclass(frozen=True)
class Selector:
    steps: tuple[SelectorStep, ...]

    def source(self) -> str:
        return "".join("/" + step.source() for step in self.steps)

    def __str__(self) -> str:
        return self.source()


def parse_selector(src: str) -> Selector:
    """Parse ``('/' step)+`` with ``step := tag ('[' pred ']')?`` and
    ``pred := "id='" STRING "'" | INTEGER``. Whitespace is illegal."""
    sel, end = parse_selector_prefix(src, 0)
    if end != len(src):
        raise SelectorSyntaxError("trailing characters after selector", end)
    return sel


def parse_selector_prefix(src: str, start: int) -> tuple[Selector, int]:
    """Parse a selector beginning at ``start``; returns it and the offset
    just past it. Used by the formula parser to lift selectors out of
    larger expressions."""
    pos = start
    steps: list[SelectorStep] = []
    if pos >= len(src) or src[pos] != "/":
        raise SelectorSyntaxError("selector must start with '/'", pos)
    while pos < len(src) and src[pos] == "/":
        pos += 1
        tag_start = pos
        while pos < len(src) and (src[pos].isalnum() or src[pos] == "-"):
            pos += 1
        tag = src[tag_start:pos]
        if not tag:
            raise SelectorSyntaxError("expected a tag name", tag_start)
        if tag not in TAG_TO_KIND:
            raise SelectorSyntaxError(f"unknown tag name {tag!r}", tag_start)
        user_id: str | None = None
        index: int | None = None
        if pos < len(src) and src[pos] == "[":
            bracket = pos
            pos += 1
            if src.startswith("id='", pos):
                pos += 4
                id_start = pos
                while pos < len(src) and src[pos] != "'":
                    if src[pos].isspace():
                        raise SelectorSyntaxError("whitespace in selector", pos)
                    pos += 1
                if pos >= len(src):
                    raise SelectorSyntaxError("unterminated id predicate", bracket)
                user_id = src[id_start:pos]
                pos += 1
                if pos >= len(src) or src[pos] != "]":
                    raise SelectorSyntaxError("expected ']'", bracket)
                pos += 1
            else:
                num_start = pos
                while pos < len(src) and src[pos].isdigit():
                    pos += 1
                if pos == num_start or pos >= len(src) or src[pos] != "]":
                    raise SelectorSyntaxError("malformed predicate", bracket)
                index = int(src[num_start:pos])
                pos += 1
        steps.append(SelectorStep(TAG_TO_KIND[tag], user_id=user_id, index=index))
    for offset in range(start, pos):
        if src[offset].isspace():
            raise SelectorSyntaxError("whitespace in selector", offset)
    return Selector(tuple(steps)), pos


def print_selector(sel: Selector) -> str:
    return sel.source()


# ---------------------------------------------------------------------------
# Resolution


def _step_matches(parent: Node, step: SelectorStep) -> list[Node]:
    kind_matches = [c for c in parent.children if c.kind is step.kind]
    if step.user_id is not None:
        return [c for c in kind_matches if c.user_id == step.user_id]
    if step.index is not None:
        if step.index < len(kind_matches):
            return [kind_matches[step.index]]
        return []
    return kind_matches


def resolve_nodes(doc: Document, sel: Selector) -> list[Node]:
    current = [doc.root]
    for step in sel.steps:
        current = [m for parent in current for m in _step_matches(parent, step)]
    return current


def resolve(doc: Document, sel: Selector) -> list[NodeId]:
    """The denoted node ids in document order; empty means no match."""
    return [n.id for n in resolve_nodes(doc, sel)]


@dataclass
class _Trace:
    """Per-step resolution trace: all matched nodes, the subset that
    contributes to the final result, and each step's matched parents."""

    matched: list[list[Node]]
    contributing: list[list[Node]]
    parents_of: list[dict[NodeId, Node]]  # matched node id -> its parent


def _trace(doc: Document, sel: Selector) -> _Trace:
    matched: list[list[Node]] = []
    parents_of: list[dict[NodeId, Node]] = []
    current = [doc.root]
    for step in sel.steps:
        level: list[Node] = []
        parents: dict[NodeId, Node] = {}
        for parent in current:
            for m in _step_matches(parent, step):
                level.append(m)
                parents[m.id] = parent
        matched.append(level)
        parents_of.append(parents)
        current = level
    contributing: list[list[Node]] = [[] for _ in sel.steps]
    if sel.steps:
        contributing[-1] = list(matched[-1])
        for i in range(len(sel.steps) - 2, -1, -1):
            keep_ids = {parents_of[i + 1][n.id].id for n in contributing[i + 1]}
            contributing[i] = [n for n in matched[i] if n.id in keep_ids]
    return _Trace(matched, contributing, parents_of)


# ---------------------------------------------------------------------------
# Rewriting


@dataclass(frozen=True)
class RewriteResult:
    selector: Selector
    exact: bool = True
    changed: bool = False
    reason: str | None = None

    def inexact(self, reason: str) -> RewriteResult:
        return replace(self, exact=False, reason=reason)


def _depth_of(doc: Document, node_id: NodeId) -> tuple[int, list[Node]] | None:
    """Depth of a node (root children are depth 0) plus its ancestor chain
    from the first non-root ancestor down to the node itself."""
    stack: list[tuple[Node, list[Node]]] = [(doc.root, [])]
    while stack:
        node, path = stack.pop()
        if node.id == node_id:
            full = path + [node]
            return len(full) - 2, full[1:]
        for child in node.children:
            stack.append((child, path + [node]))
    return None


def rewrite_selector(
    sel: Selector, edit: PrimitiveEdit, doc: Document
) -> RewriteResult:
    """Rewrite one selector through one primitive edit, given the concrete
    pre-edit document."""
    if isinstance(edit, ChangeNodeKind):
        return _rewrite_kind_change(sel, doc, [edit.target], edit.from_kind, edit.to_kind)
    if isinstance(edit, (SetValue, SetFormula, AddColumn, SplitValue)):
        return RewriteResult(sel)
    if isinstance(edit, InsertNode):
        return _rewrite_insert(sel, doc, edit)
    if isinstance(edit, RemoveNode):
        return _rewrite_remove(sel, doc, edit)
    if isinstance(edit, WrapChildren):
        return _rewrite_wrap(sel, doc, edit)
    if isinstance(edit, SortChildren):
        return _rewrite_sort(sel, doc, edit)
    return RewriteResult(sel)


def rewrite_through(
    sel: Selector, steps: list[tuple[PrimitiveEdit, Document]]
) -> RewriteResult:
    """Fold a selector through an edit sequence (each edit paired with its
    pre-edit document). Adjacent kind changes that re-kind siblings of one
    parent are handled as a batch, which is how the list-to-table refactoring
    re-kinds every row in one conceptual step."""
    current = sel
    exact = True
    changed = False
    reasons: list[str] = []
    i = 0
    while i < len(steps):
        edit, doc = steps[i]
        if isinstance(edit, ChangeNodeKind):
            batch = [edit.target]
            j = i + 1
            parent = doc.parent_of(edit.target)
            while j < len(steps):
                nxt, _ = steps[j]
                if not (
                    isinstance(nxt, ChangeNodeKind)
                    and nxt.from_kind is edit.from_kind
                    and nxt.to_kind is edit.to_kind
                ):
                    break
                nxt_parent = doc.parent_of(nxt.target)
                if (
                    parent is None
                    or nxt_parent is None
                    or nxt_parent[0].id != parent[0].id
                ):
                    break
                batch.append(nxt.target)
                j += 1
            result = _rewrite_kind_change(
                current, doc, batch, edit.from_kind, edit.to_kind
            )
            i = j
        else:
            result = rewrite_selector(current, edit, doc)
            i += 1
        current = result.selector
        changed = changed or result.changed
        if not result.exact:
            exact = False
            if result.reason:
                reasons.append(result.reason)
    return RewriteResult(current, exact=exact, changed=changed,
                         reason="; ".join(reasons) or None)


def _rewrite_kind_change(
    sel: Selector,
    doc: Document,
    targets: list[NodeId],
    from_kind: NodeKind,
    to_kind: NodeKind,
) -> RewriteResult:
    trace = _trace(doc, sel)
    steps = list(sel.steps)
    exact = True
    changed = False
    reason: str | None = None
    target_set = set(targets)

    # Group targets by (depth, parent) so sibling re-kinds are adjusted in
    # one pass per affected selector step.
    groups: dict[tuple[int, NodeId], tuple[Node, list[Node]]] = {}
    for target in targets:
        located = _depth_of(doc, target)
        if located is None:
            continue
        depth, chain = located
        if depth >= len(steps):
            continue
        parent = doc.parent_of(target)
        parent_node = parent[0] if parent else doc.root
        key = (depth, parent_node.id)
        groups.setdefault(key, (parent_node, []))[1].append(chain[-1])

    for (depth, _), (parent_node, nodes) in sorted(
        groups.items(), key=lambda item: item[0][0]
    ):
        step = steps[depth]
        matched_parents = trace.matched[depth - 1] if depth > 0 else [doc.root]
        if not any(p.id == parent_node.id for p in matched_parents):
            continue
        if step.index is not None:
            new_step = _kind_change_index_group(
                step, parent_node, nodes, from_kind, to_kind
            )
            if new_step != step:
                steps[depth] = new_step
                changed = True
                # An index shift under one parent diverges under any other
                # matched parent, so exactness needs a unique parent.
                if len(matched_parents) > 1:
                    exact, reason = False, "index shift under multiple parents"
        elif step.user_id is not None:
            if step.kind is from_kind and any(
                n.user_id == step.user_id for n in nodes
            ):
                steps[depth] = replace(step, kind=to_kind)
                changed = True
        else:
            if step.kind is from_kind:
                contrib_ids = {n.id for n in trace.contributing[depth]}
                rekind_ids = {n.id for n in nodes}
                if contrib_ids & rekind_ids:
                    if contrib_ids <= target_set:
                        steps[depth] = replace(step, kind=to_kind)
                        changed = True
                    else:
                        exact = False
                        reason = (
                            "re-kinded some but not all contributing "
                            f"{KIND_TO_TAG[from_kind]} nodes"
                        )
    return RewriteResult(Selector(tuple(steps)), exact=exact, changed=changed,
                         reason=reason)


def _kind_change_index_group(
    step: SelectorStep,
    parent: Node,
    nodes: list[Node],
    from_kind: NodeKind,
    to_kind: NodeKind,
) -> SelectorStep:
    """Adjust an index predicate for a set of siblings changing kind at once,
    computed against the pre-edit child list."""
    assert step.index is not None
    rekind_ids = {n.id for n in nodes}
    if step.kind is from_kind:
        kind_matches = [c for c in parent.children if c.kind is from_kind]
        if step.index >= len(kind_matches):
            return step
        denoted = kind_matches[step.index]
        if denoted.id in rekind_ids:
            # The denoted node itself re-kinds: follow it into its new kind.
            post = [
                c
                for c in parent.children
                if c.kind is to_kind or c.id in rekind_ids
            ]
            return SelectorStep(to_kind, index=[c.id for c in post].index(denoted.id))
        leavers_before = sum(
            1 for c in kind_matches[: step.index] if c.id in rekind_ids
        )
        if leavers_before:
            return replace(step, index=step.index - leavers_before)
        return step
    if step.kind is to_kind:
        kind_matches = [c for c in parent.children if c.kind is to_kind]
        if step.index >= len(kind_matches):
            return step
        denoted = kind_matches[step.index]
        post = [
            c for c in parent.children if c.kind is to_kind or c.id in rekind_ids
        ]
        return replace(step, index=[c.id for c in post].index(denoted.id))
    return step


def _rewrite_insert(sel: Selector, doc: Document, edit: InsertNode) -> RewriteResult:
    parent = doc.find(edit.parent)
    if parent is None:
        return RewriteResult(sel)
    located = _depth_of(doc, edit.parent)
    child_depth = (located[0] + 1) if located is not None else 0
    if edit.parent == doc.root.id:
        child_depth = 0
    if child_depth >= len(sel.steps):
        return RewriteResult(sel)
    step = sel.steps[child_depth]
    trace = _trace(doc, sel)
    matched_parents = (
        trace.matched[child_depth - 1] if child_depth > 0 else [doc.root]
    )
    if not any(p.id == parent.id for p in matched_parents):
        return RewriteResult(sel)
    if step.user_id is not None and edit.spec.user_id == step.user_id:
        # The insert duplicates the id the predicate relies on.
        return RewriteResult(sel).inexact(f"user id {step.user_id!r} duplicated")
    if step.index is None or edit.spec.kind is not step.kind:
        return RewriteResult(sel)
    before = parent.children[: edit.position]
    q = sum(1 for c in before if c.kind is step.kind)
    if q <= step.index:
        steps = list(sel.steps)
        steps[child_depth] = replace(step, index=step.index + 1)
        exact = len(matched_parents) == 1
        result = RewriteResult(Selector(tuple(steps)), changed=True, exact=exact)
        return result if exact else result.inexact("index shift under multiple parents")
    return RewriteResult(sel)


def _rewrite_remove(sel: Selector, doc: Document, edit: RemoveNode) -> RewriteResult:
    located = _depth_of(doc, edit.target)
    if located is None:
        return RewriteResult(sel)
    depth, chain = located
    if depth >= len(sel.steps):
        return RewriteResult(sel)
    node = chain[-1]
    step = sel.steps[depth]
    if step.index is None or node.kind is not step.kind:
        return RewriteResult(sel)
    parent = doc.parent_of(edit.target)
    parent_node = parent[0] if parent else doc.root
    trace = _trace(doc, sel)
    matched_parents = trace.matched[depth - 1] if depth > 0 else [doc.root]
    if not any(p.id == parent_node.id for p in matched_parents):
        return RewriteResult(sel)
    kind_matches = [c.id for c in parent_node.children if c.kind is step.kind]
    if node.id not in kind_matches:
        return RewriteResult(sel)
    q = kind_matches.index(node.id)
    steps = list(sel.steps)
    if q < step.index:
        steps[depth] = replace(step, index=step.index - 1)
    elif q == step.index:
        # The denoted node is going away; pin the index at the first
        # out-of-range position post-removal so the selector dangles
        # (resolves empty) instead of silently retargeting a sibling.
        steps[depth] = replace(step, index=len(kind_matches) - 1)
    else:
        return RewriteResult(sel)
    exact = len(matched_parents) == 1
    result = RewriteResult(Selector(tuple(steps)), changed=True, exact=exact)
    return result if exact else result.inexact("index shift under multiple parents")


def _rewrite_wrap(sel: Selector, doc: Document, edit: WrapChildren) -> RewriteResult:
    target = doc.find(edit.target)
    if target is None:
        return RewriteResult(sel)
    if edit.target == doc.root.id:
        depth = -1
    else:
        located = _depth_of(doc, edit.target)
        if located is None:
            return RewriteResult(sel)
        depth = located[0]
    # Only selectors that descend past the wrapped node need the new step.
    if depth + 1 >= len(sel.steps):
        return RewriteResult(sel)
    trace = _trace(doc, sel)
    if depth >= 0:
        contributing = trace.contributing[depth]
        if not any(n.id == target.id for n in contributing):
            return RewriteResult(sel)
        others = [n for n in contributing if n.id != target.id]
    else:
        others = []
    steps = list(sel.steps)
    steps.insert(depth + 1, SelectorStep(edit.wrapper_kind))
    result = RewriteResult(Selector(tuple(steps)), changed=True)
    if others:
        return result.inexact("wrap splits paths through sibling matches")
    return result


def _rewrite_sort(sel: Selector, doc: Document, edit: SortChildren) -> RewriteResult:
    container = doc.find(edit.target)
    if container is None:
        return RewriteResult(sel)
    if edit.target == doc.root.id:
        child_depth = 0
    else:
        located = _depth_of(doc, edit.target)
        if located is None:
            return RewriteResult(sel)
        child_depth = located[0] + 1
    if child_depth >= len(sel.steps):
        return RewriteResult(sel)
    step = sel.steps[child_depth]
    if step.index is None:
        return RewriteResult(sel)
    trace = _trace(doc, sel)
    matched_parents = (
        trace.matched[child_depth - 1] if child_depth > 0 else [doc.root]
    )
    if not any(p.id == container.id for p in matched_parents):
        return RewriteResult(sel)
    kind_matches = [c for c in container.children if c.kind is step.kind]
    if step.index >= len(kind_matches):
        return RewriteResult(sel)
    denoted = kind_matches[step.index]
    order = {node_id: pos for pos, node_id in enumerate(edit.permutation)}
    new_children = sorted(
        container.children, key=lambda c: order.get(c.id, len(order))
    )
    new_kind_matches = [c for c in new_children if c.kind is step.kind]
    new_index = [c.id for c in new_kind_matches].index(denoted.id)
    if new_index == step.index:
        return RewriteResult(sel)
    steps = list(sel.steps)
    steps[child_depth] = replace(step, index=new_index)
    exact = len(matched_parents) == 1
    result = RewriteResult(Selector(tuple(steps)), changed=True, exact=exact)
    return result if exact else result.inexact("index shift under multiple parents")
