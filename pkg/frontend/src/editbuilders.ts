/** Builders turning palette inputs into EditOps against the fetched document.
 *
 * The structure editor records high-level edits: the list-to-table
 * refactoring is one op carrying its full primitive expansion (re-kind,
 * wrap, re-kind rows, split rows, header row, extra columns), with every
 * created id minted client-side so the op replays identically anywhere.
 */

import type { IdAlloc } from "./alloc.js";
import type { DocNode, EditOp, NodeSpecWire, SortKeyWire } from "./types.js";

export const FIRST_WORD_ASC: SortKeyWire = {
  mode: "first-word",
  ascending: true,
  caseInsensitive: true,
};

export function addListItem(list: DocNode, text: string, alloc: IdAlloc): EditOp {
  return {
    type: "insert",
    parent: list.id,
    position: list.children.length,
    spec: { kind: "li", newId: alloc.fresh(), text },
  };
}

export function editText(node: DocNode, newText: string): EditOp {
  return {
    type: "set-value",
    target: node.id,
    newText,
    oldText: node.text ?? "",
  };
}

export function removeNode(node: DocNode): EditOp {
  return { type: "remove", target: node.id };
}

function firstLeafText(node: DocNode): string {
  if (node.text !== undefined) return node.text;
  if (node.kind === "computed-value") return node.formula ?? "";
  for (const child of node.children) {
    const text = firstLeafText(child);
    if (text) return text;
  }
  return "";
}

export function sortPermutation(container: DocNode, key: SortKeyWire): string[] {
  const keyed = container.children.map((child, index) => {
    let text = firstLeafText(child);
    if (key.mode === "first-word") text = text.split(/\s+/)[0] ?? "";
    if (key.caseInsensitive) text = text.toLowerCase();
    return { id: child.id, text, index };
  });
  keyed.sort((a, b) => {
    if (a.text < b.text) return key.ascending ? -1 : 1;
    if (a.text > b.text) return key.ascending ? 1 : -1;
    return a.index - b.index; // stable
  });
  return keyed.map((k) => k.id);
}

export function sortList(list: DocNode, key: SortKeyWire = FIRST_WORD_ASC): EditOp {
  return {
    type: "sort-children",
    target: list.id,
    key,
    permutation: sortPermutation(list, key),
  };
}

export function addComputedValue(
  defList: DocNode,
  formula: string,
  alloc: IdAlloc,
): EditOp {
  const spec: NodeSpecWire = {
    kind: "dd",
    newId: alloc.fresh(),
    children: [{ kind: "computed-value", newId: alloc.fresh(), formula }],
  };
  return {
    type: "insert",
    parent: defList.id,
    position: defList.children.length,
    spec,
  };
}

export function addColumn(
  table: DocNode,
  header: string,
  defaultText: string,
  alloc: IdAlloc,
): EditOp {
  const headerRow = table.children.find((c) => c.kind === "tr");
  const rows = table.children
    .filter((c) => c.kind === "tbody")
    .flatMap((tbody) => tbody.children);
  const cellIds: [string, string][] = [];
  if (headerRow) cellIds.push([headerRow.id, alloc.fresh()]);
  for (const row of rows) cellIds.push([row.id, alloc.fresh()]);
  return {
    type: "add-column",
    table: table.id,
    header,
    default: defaultText,
    cellIds,
  };
}

export interface RefactorInputs {
  separator: string;
  headers: string[];
  defaultText: string;
}

export function refactorListToTable(
  list: DocNode,
  inputs: RefactorInputs,
  alloc: IdAlloc,
): EditOp {
  const rows = list.children;
  const expansion: EditOp[] = [
    { type: "change-kind", target: list.id, from: "ul", to: "table" },
    {
      type: "wrap-children",
      target: list.id,
      wrapperKind: "tbody",
      wrapperId: alloc.fresh(),
    },
  ];
  for (const row of rows) {
    expansion.push({ type: "change-kind", target: row.id, from: "li", to: "tr" });
  }
  for (const row of rows) {
    expansion.push({
      type: "split-value",
      target: row.id,
      separator: inputs.separator,
      cellKind: "td",
      cellIds: [alloc.fresh(), alloc.fresh()],
    });
  }
  const headerRowId = alloc.fresh();
  expansion.push({
    type: "insert",
    parent: list.id,
    position: 0,
    spec: {
      kind: "tr",
      newId: headerRowId,
      children: inputs.headers.slice(0, 2).map((text) => ({
        kind: "td",
        newId: alloc.fresh(),
        text,
      })),
    },
  });
  for (const header of inputs.headers.slice(2)) {
    const cellIds: [string, string][] = [[headerRowId, alloc.fresh()]];
    for (const row of rows) cellIds.push([row.id, alloc.fresh()]);
    expansion.push({
      type: "add-column",
      table: list.id,
      header,
      default: inputs.defaultText,
      cellIds,
    });
  }
  return {
    type: "refactor-list-to-table",
    list: list.id,
    separator: inputs.separator,
    headers: inputs.headers,
    default: inputs.defaultText,
    expansion,
  };
}
