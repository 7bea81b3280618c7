/** Wire types mirroring the service's JSON surfaces. */

export type NodeKind =
  | "document"
  | "heading"
  | "p"
  | "ul"
  | "li"
  | "table"
  | "tbody"
  | "tr"
  | "td"
  | "dl"
  | "dt"
  | "dd"
  | "computed-value";

export interface DocNode {
  id: string;
  kind: NodeKind;
  userId?: string;
  text?: string;
  formula?: string;
  children: DocNode[];
}

export interface NodeSpecWire {
  kind: NodeKind;
  newId: string;
  userId?: string;
  text?: string;
  formula?: string;
  children?: NodeSpecWire[];
}

export interface SortKeyWire {
  mode: "first-word" | "full-text";
  ascending: boolean;
  caseInsensitive: boolean;
}

export type EditOp =
  | { type: "insert"; parent: string; position: number; spec: NodeSpecWire }
  | { type: "remove"; target: string }
  | { type: "set-value"; target: string; newText: string; oldText: string }
  | { type: "set-formula"; target: string; newSource: string; oldSource: string }
  | { type: "change-kind"; target: string; from: NodeKind; to: NodeKind }
  | { type: "wrap-children"; target: string; wrapperKind: NodeKind; wrapperId: string }
  | {
      type: "split-value";
      target: string;
      separator: string;
      cellKind: NodeKind;
      cellIds: [string, string];
    }
  | { type: "sort-children"; target: string; key: SortKeyWire; permutation: string[] }
  | {
      type: "add-column";
      table: string;
      header: string;
      default: string;
      cellIds: [string, string][];
    }
  | {
      type: "refactor-list-to-table";
      list: string;
      separator: string;
      headers: string[];
      default: string;
      expansion: EditOp[];
    };

export interface ConflictOptionWire {
  description: string;
  payload: unknown;
}

export interface ConflictWire {
  conflictId: string;
  kind: string;
  site: string;
  optionA: ConflictOptionWire;
  optionB: ConflictOptionWire;
}

export interface DocPayload {
  document: DocNode;
  version: string;
  render: string;
}

export interface EditResponse extends DocPayload {
  dirty: string[];
  values: Record<string, unknown>;
}

export interface MergeComplete extends DocPayload {
  conflicts: ConflictWire[];
  dirty: string[];
  values: Record<string, unknown>;
}

export type Choice =
  | { choice: "take-a" }
  | { choice: "take-b" }
  | { choice: "custom"; payload: unknown };

/** Depth-first walk. */
export function* walk(node: DocNode): Generator<DocNode> {
  yield node;
  for (const child of node.children) yield* walk(child);
}

export function findNode(root: DocNode, id: string): DocNode | null {
  for (const node of walk(root)) if (node.id === id) return node;
  return null;
}

export function findParent(root: DocNode, id: string): DocNode | null {
  for (const node of walk(root)) {
    if (node.children.some((c) => c.id === id)) return node;
  }
  return null;
}

export function findByText(root: DocNode, text: string): DocNode | null {
  for (const node of walk(root)) if (node.text === text) return node;
  return null;
}
