"""Dirty-set computation and cache refresh for computed values.

``dirty_set(doc, edit)`` over-approximates the computed values whose result
the edit may change: those whose formula source the edit rewrites, those
whose dependency selectors resolve differently afterwards, those reading a
touched node, and everything transitively downstream. A structural rewrite
that provably preserves a formula's references (same resolved ids, nothing
touched) marks only the rewritten node itself, which is why refactoring the
speakers list dirties the count formula but not the travel expenses.
"""

from __future__ import annotations

from .edits import apply_edit, touched_ids
from .formulas import (
    BinaryOp,
    Call,
    FormulaAst,
    FormulaSyntaxError,
    SelectorRef,
    dependencies,
    eval_formula,
    format_value,
    parse_formula,
    value_carrier,
)
from .selectors import Selector
from .model import Document, Node, NodeId, NodeKind
from .ops import EditOp, SetFormula, created_ids, expand
from .selectors import resolve, resolve_nodes


def computed_nodes(doc: Document) -> list[Node]:
    return [n for n in doc.walk() if n.kind is NodeKind.COMPUTED]


def _dep_specs(ast: FormulaAst) -> list[tuple[Selector, bool]]:
    """(selector, reads-content) pairs: COUNT cares only about membership,
    SUM and plain references read the resolved nodes' content."""
    if isinstance(ast, SelectorRef):
        return [(ast.selector, True)]
    if isinstance(ast, Call):
        return [(ast.arg, ast.func != "COUNT")]
    if isinstance(ast, BinaryOp):
        return _dep_specs(ast.left) + _dep_specs(ast.right)
    return []


def _value_dependency_edges(doc: Document) -> dict[NodeId, set[NodeId]]:
    """computed node -> computed nodes whose values it reads."""
    edges: dict[NodeId, set[NodeId]] = {}
    for node in computed_nodes(doc):
        reads: set[NodeId] = set()
        try:
            ast = parse_formula(node.formula or "")
        except FormulaSyntaxError:
            edges[node.id] = reads
            continue
        for sel in dependencies(ast):
            for resolved in resolve_nodes(doc, sel):
                carrier = value_carrier(resolved)
                if carrier.kind is NodeKind.COMPUTED:
                    reads.add(carrier.id)
        edges[node.id] = reads
    return edges


def dirty_set(doc: Document, op: EditOp) -> frozenset[NodeId]:
    """Computed-value ids needing re-evaluation after ``op``; a superset of
    those whose value actually changes."""
    post = apply_edit(doc, op)
    touched = touched_ids(doc, op)
    created = set(created_ids(op))
    user_set_formulas = {
        prim.target for prim in expand(op) if isinstance(prim, SetFormula)
    }

    pre_formulas = {
        n.id: n.formula for n in doc.walk() if n.kind is NodeKind.COMPUTED
    }

    dirty: set[NodeId] = set()
    propagating: set[NodeId] = set()
    for node in computed_nodes(post):
        pre_source = pre_formulas.get(node.id)
        source_changed = pre_source is not None and pre_source != node.formula
        if node.id in created or node.id in user_set_formulas:
            dirty.add(node.id)
            propagating.add(node.id)
            continue
        try:
            ast = parse_formula(node.formula or "")
            pre_ast = parse_formula(pre_source) if pre_source is not None else None
        except FormulaSyntaxError:
            dirty.add(node.id)
            propagating.add(node.id)
            continue

        refs_changed = False
        # Reads of touched content dirty the reader (COUNT is insensitive to
        # member content, only to membership).
        for sel, reads_content in _dep_specs(ast):
            if not reads_content:
                continue
            for resolved in resolve_nodes(post, sel):
                if {n.id for n in resolved.walk()} & touched:
                    refs_changed = True
        # A dependency set resolving to different nodes dirties it too; the
        # pre side uses the pre-edit source, so a rewritten selector is
        # compared against what it used to denote.
        pre_resolved: set[NodeId] = set()
        post_resolved: set[NodeId] = set()
        if pre_ast is not None:
            for sel in dependencies(pre_ast):
                pre_resolved.update(resolve(doc, sel))
        for sel in dependencies(ast):
            post_resolved.update(resolve(post, sel))
        if pre_resolved != post_resolved:
            refs_changed = True

        if refs_changed:
            dirty.add(node.id)
            propagating.add(node.id)
        elif source_changed:
            # A reference-preserving rewrite: the display must refresh but
            # the value cannot have moved, so dependents stay clean.
            dirty.add(node.id)

    # Transitive closure over value reads, post-edit.
    edges = _value_dependency_edges(post)
    changed = True
    while changed:
        changed = False
        for node_id, reads in edges.items():
            if node_id not in propagating and reads & propagating:
                propagating.add(node_id)
                dirty.add(node_id)
                changed = True
    return frozenset(dirty)


def recompute(doc: Document, dirty: frozenset[NodeId] | set[NodeId]) -> Document:
    """Refresh cached display values for the given computed nodes. Untouched
    caches are preserved; evaluation itself reads the tree, so order does
    not affect results."""
    for node_id in dirty:
        node = doc.find(node_id)
        if node is None or node.kind is not NodeKind.COMPUTED:
            raise ValueError(f"{node_id} is not a computed value in this document")
    if not dirty:
        return doc
    new_doc = doc.clone()
    for node_id in dirty:
        node = new_doc.find(node_id)
        assert node is not None
        node.cached = format_value(eval_formula(new_doc, node_id))
    return new_doc


def recompute_all(doc: Document) -> Document:
    return recompute(doc, {n.id for n in computed_nodes(doc)})
