from __future__ import annotations

import pytest

from blockmerge.edits import apply_edit
from blockmerge.formulas import (
    BinaryOp,
    Call,
    ErrorValue,
    FormulaSyntaxError,
    Number,
    NumberLit,
    SelectorRef,
    canonicalize,
    coerce_text,
    dependencies,
    eval_formula,
    format_value,
    parse_formula,
    print_formula,
)
from blockmerge.model import IdAllocator, NodeKind
from blockmerge.ops import InsertNode, NodeSpec, SetValue
from blockmerge.recompute import computed_nodes, dirty_set, recompute
from blockmerge.selectors import parse_selector


def _computed_by_formula(doc, fragment):
    return next(n for n in computed_nodes(doc) if fragment in (n.formula or ""))


def test_parse_count_call():
    ast = parse_formula("=COUNT(/ul[id='speakers']/li)")
    assert isinstance(ast, Call)
    assert ast.func == "COUNT"
    assert ast.arg == parse_selector("/ul[id='speakers']/li")


def test_parse_product_of_refs():
    ast = parse_formula("=/dl/dd[0] * /dl/dd[1]")
    assert isinstance(ast, BinaryOp) and ast.op == "*"
    assert isinstance(ast.left, SelectorRef) and isinstance(ast.right, SelectorRef)


def test_parse_dangling_operator():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("=1 + ")


@pytest.mark.parametrize("bad", ["1+2", "=AVG(/dl/dd)", "=COUNT(3)", "=(1+2", "=$"])
def test_parse_rejects(bad):
    with pytest.raises(FormulaSyntaxError):
        parse_formula(bad)


def test_precedence_and_printing():
    assert canonicalize("=1+2*3") == "=1 + 2 * 3"
    assert canonicalize("=(1+2)*3") == "=(1 + 2) * 3"
    assert canonicalize("=2 - (3 - 4)") == "=2 - (3 - 4)"
    assert canonicalize("=COUNT( /ul[id='speakers']/li )") == "=COUNT(/ul[id='speakers']/li)"


def test_print_parse_identity_on_paper_formulas():
    for src in ["=COUNT(/ul[id='speakers']/li)", "=/dl/dd[0] * /dl/dd[1]"]:
        assert print_formula(parse_formula(src)) == src


def test_dependencies(figures):
    count = _computed_by_formula(figures["fig6"], "COUNT")
    expenses = _computed_by_formula(figures["fig6"], "*")
    assert dependencies(parse_formula(count.formula)) == {
        parse_selector("/ul[id='speakers']/li")
    }
    assert dependencies(parse_formula(expenses.formula)) == {
        parse_selector("/dl/dd[0]"),
        parse_selector("/dl/dd[1]"),
    }
    assert dependencies(parse_formula("=1+2")) == frozenset()


def test_coercion():
    assert coerce_text("$1200") == 1200.0
    assert coerce_text("1,200.50") == 1200.5
    assert coerce_text(" 42 ") == 42.0
    assert coerce_text("abc") is None
    assert coerce_text("") is None
    assert coerce_text("$$5") is None


def test_eval_fig6_values(figures):
    # Oracle: three li items in the list, $1200 per speaker -> 3 and 3600.
    doc = figures["fig6"]
    count = _computed_by_formula(doc, "COUNT")
    expenses = _computed_by_formula(doc, "*")
    assert eval_formula(doc, count.id) == Number(3.0)
    assert eval_formula(doc, expenses.id) == Number(3600.0)


def test_eval_fig7_values(figures):
    # Oracle: four table rows after the merge -> 4 and 4800.
    doc = figures["fig7"]
    count = _computed_by_formula(doc, "COUNT")
    expenses = _computed_by_formula(doc, "*")
    assert eval_formula(doc, count.id) == Number(4.0)
    assert eval_formula(doc, expenses.id) == Number(4800.0)


def _budget_playground(figures):
    """fig6 plus an allocator, for error-path surgery."""
    doc = figures["fig6"].clone()
    return doc, IdAllocator(doc, "t")


def test_eval_coercion_failure(figures):
    doc, _ = _budget_playground(figures)
    dd = next(n for n in doc.walk() if n.text == "$1200")
    doc = apply_edit(doc, SetValue(dd.id, "abc", "$1200"))
    expenses = _computed_by_formula(doc, "*")
    value = eval_formula(doc, expenses.id)
    assert isinstance(value, ErrorValue) and value.code == "NUM"


def test_eval_ref_error_on_multi_match(figures):
    doc, alloc = _budget_playground(figures)
    dl = next(n for n in doc.walk() if n.kind is NodeKind.DEF_LIST)
    dd = NodeSpec(
        NodeKind.DEF_VALUE,
        alloc.fresh(),
        children=(NodeSpec(NodeKind.COMPUTED, alloc.fresh(), formula="=/dl/dt"),),
    )
    doc = apply_edit(doc, InsertNode(dl.id, len(dl.children), dd))
    value = eval_formula(doc, dd.children[0].new_id)
    assert isinstance(value, ErrorValue) and value.code == "REF"


def test_eval_div0(figures):
    doc, alloc = _budget_playground(figures)
    dl = next(n for n in doc.walk() if n.kind is NodeKind.DEF_LIST)
    dd = NodeSpec(
        NodeKind.DEF_VALUE,
        alloc.fresh(),
        children=(NodeSpec(NodeKind.COMPUTED, alloc.fresh(), formula="=1/0"),),
    )
    doc = apply_edit(doc, InsertNode(dl.id, len(dl.children), dd))
    value = eval_formula(doc, dd.children[0].new_id)
    assert isinstance(value, ErrorValue) and value.code == "DIV0"


def _cycle_doc(figures):
    from blockmerge.ops import SetFormula

    doc, alloc = _budget_playground(figures)
    dl = next(n for n in doc.walk() if n.kind is NodeKind.DEF_LIST)
    base_len = len(dl.children)
    # dd[3] and dd[4] reference each other (formulas set after both exist so
    # the forward reference is not index-shifted by the second insert)
    first = NodeSpec(
        NodeKind.DEF_VALUE,
        alloc.fresh(),
        children=(NodeSpec(NodeKind.COMPUTED, alloc.fresh(), formula="=0"),),
    )
    second = NodeSpec(
        NodeKind.DEF_VALUE,
        alloc.fresh(),
        children=(NodeSpec(NodeKind.COMPUTED, alloc.fresh(), formula="=0"),),
    )
    doc = apply_edit(doc, InsertNode(dl.id, base_len, first))
    doc = apply_edit(doc, InsertNode(dl.id, base_len + 1, second))
    doc = apply_edit(doc, SetFormula(first.children[0].new_id, "=/dl/dd[4]", "=0"))
    doc = apply_edit(doc, SetFormula(second.children[0].new_id, "=/dl/dd[3]", "=0"))
    return doc, (first.children[0].new_id, second.children[0].new_id)


def test_eval_cycle(figures):
    doc, (a, b) = _cycle_doc(figures)
    for node_id in (a, b):
        value = eval_formula(doc, node_id)
        assert isinstance(value, ErrorValue) and value.code == "CYCLE"


def test_eval_sum(figures):
    doc, alloc = _budget_playground(figures)
    dl = next(n for n in doc.walk() if n.kind is NodeKind.DEF_LIST)
    # SUM over dd set: $1200 + count(3) + expenses(3600)
    dd = NodeSpec(
        NodeKind.DEF_VALUE,
        alloc.fresh(),
        children=(NodeSpec(NodeKind.COMPUTED, alloc.fresh(), formula="=SUM(/dl/dd)"),),
    )
    doc = apply_edit(doc, InsertNode(dl.id, len(dl.children), dd))
    value = eval_formula(doc, dd.children[0].new_id)
    assert isinstance(value, ErrorValue) and value.code == "CYCLE"
    # the new dd participates in its own SUM; narrow it instead
    narrow = _computed_by_formula(doc, "SUM")
    doc2 = doc.clone()
    target = doc2.find(narrow.id)
    target.formula = "=/dl/dd[0] + /dl/dd[1]"
    assert eval_formula(doc2, narrow.id) == Number(1203.0)


def test_eval_caller_errors(figures):
    doc = figures["fig6"]
    with pytest.raises(ValueError):
        eval_formula(doc, doc.root.id)


def test_format_value():
    assert format_value(Number(4.0)) == "4"
    assert format_value(Number(4.5)) == "4.5"
    assert format_value(ErrorValue("REF", "x")) == "#REF!"
    assert format_value(ErrorValue("DIV0", "x")) == "#DIV/0!"


def test_first_error_left_to_right(figures):
    doc, alloc = _budget_playground(figures)
    dl = next(n for n in doc.walk() if n.kind is NodeKind.DEF_LIST)
    dd = NodeSpec(
        NodeKind.DEF_VALUE,
        alloc.fresh(),
        children=(
            NodeSpec(NodeKind.COMPUTED, alloc.fresh(), formula="=/dl/dd[9] + 1/0"),
        ),
    )
    doc = apply_edit(doc, InsertNode(dl.id, len(dl.children), dd))
    value = eval_formula(doc, dd.children[0].new_id)
    assert isinstance(value, ErrorValue) and value.code == "REF"  # not DIV0


def test_eval_depends_only_on_content():
    from genlib import Gen
    from blockmerge.model import structurally_equal

    found = 0
    for seed in range(60):
        one = Gen(seed).random_document()
        two = Gen(seed).random_document()
        assert structurally_equal(one, two)
        one_computed = computed_nodes(one)
        for a, b in zip(one_computed, computed_nodes(two)):
            va, vb = eval_formula(one, a.id), eval_formula(two, b.id)
            if isinstance(va, Number):
                assert isinstance(vb, Number) and va.value == vb.value
            else:
                assert isinstance(vb, ErrorValue) and va.code == vb.code
            found += 1
    assert found > 10


# ---------------------------------------------------------------------------
# dirty set + recompute


def test_dirty_insert_speaker(figures, handles):
    # Oracle: full re-evaluation changes both computed values (3->4, 3600->4800).
    doc = figures["fig6"]
    alloc = IdAllocator(doc, "dirty")
    edit = InsertNode(
        handles.speakers_list,
        3,
        NodeSpec(NodeKind.LIST_ITEM, alloc.fresh(), text="Grace Hopper, gh@navy.mil"),
    )
    dirty = dirty_set(doc, edit)
    count = _computed_by_formula(doc, "COUNT")
    expenses = _computed_by_formula(doc, "*")
    assert {count.id, expenses.id} <= dirty


def test_dirty_title_edit_empty(figures):
    doc = figures["fig6"]
    heading = doc.root.children[0]
    edit = SetValue(heading.id, "PROGRAMMING CONFERENCE 2024", heading.text)
    assert dirty_set(doc, edit) == frozenset()


def test_dirty_refactor_marks_count_not_expenses(figures, handles):
    from blockmerge.edits import expand_refactor_list_to_table

    doc = figures["fig6"]
    alloc = IdAllocator(doc, "dirty")
    composite = expand_refactor_list_to_table(
        doc, handles.speakers_list, ",", ["Name", "Email", "Organizer"], "", alloc
    )
    dirty = dirty_set(doc, composite)
    count = _computed_by_formula(doc, "COUNT")
    expenses = _computed_by_formula(doc, "*")
    assert count.id in dirty  # its formula source is rewritten
    assert expenses.id not in dirty  # provably unchanged references


def test_recompute_empty_is_identity(figures):
    doc = figures["fig6"]
    assert recompute(doc, frozenset()) is doc


def test_recompute_after_insert(figures, handles):
    doc = figures["fig6"]
    alloc = IdAllocator(doc, "dirty")
    edit = InsertNode(
        handles.speakers_list,
        3,
        NodeSpec(NodeKind.LIST_ITEM, alloc.fresh(), text="Grace Hopper, gh@navy.mil"),
    )
    dirty = dirty_set(doc, edit)
    new_doc = recompute(apply_edit(doc, edit), dirty)
    count = _computed_by_formula(new_doc, "COUNT")
    expenses = _computed_by_formula(new_doc, "*")
    assert new_doc.find(count.id).cached == "4"
    assert new_doc.find(expenses.id).cached == "4800"


def test_recompute_cycle_caches_errors(figures):
    doc, pair = _cycle_doc(figures)
    new_doc = recompute(doc, frozenset(pair))
    for node_id in pair:
        assert new_doc.find(node_id).cached == "#CYCLE!"


def test_recompute_rejects_non_computed(figures):
    doc = figures["fig6"]
    with pytest.raises(ValueError):
        recompute(doc, frozenset({doc.root.id}))
