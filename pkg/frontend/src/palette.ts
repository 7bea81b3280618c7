/** Kind-gated edit palette: exactly the actions the service would accept for
 * the current selection, mirroring its validation rules. */

import type { DocNode } from "./types.js";

export type ActionId =
  | "add-list-item"
  | "edit-text"
  | "remove"
  | "sort-list"
  | "refactor-list-to-table"
  | "add-column"
  | "add-computed-value";

export interface PaletteAction {
  id: ActionId;
  label: string;
  /** Input fields the action prompts for before posting. */
  prompts: string[];
}

const ACTIONS: Record<ActionId, PaletteAction> = {
  "add-list-item": {
    id: "add-list-item",
    label: "Add list item",
    prompts: ["text"],
  },
  "edit-text": { id: "edit-text", label: "Edit text", prompts: ["text"] },
  remove: { id: "remove", label: "Remove", prompts: [] },
  "sort-list": {
    id: "sort-list",
    label: "Sort list (by first word)",
    prompts: [],
  },
  "refactor-list-to-table": {
    id: "refactor-list-to-table",
    label: "Refactor list into table",
    prompts: ["separator", "headers", "default"],
  },
  "add-column": {
    id: "add-column",
    label: "Add column",
    prompts: ["header", "default"],
  },
  "add-computed-value": {
    id: "add-computed-value",
    label: "Add computed value",
    prompts: ["formula"],
  },
};

export function paletteActions(selection: DocNode | null, isRoot: boolean): PaletteAction[] {
  if (selection === null) return [];
  const out: PaletteAction[] = [];
  if (selection.kind === "ul") {
    out.push(ACTIONS["add-list-item"]);
    if (selection.children.length > 1) out.push(ACTIONS["sort-list"]);
    out.push(ACTIONS["refactor-list-to-table"]);
  }
  if (selection.text !== undefined) {
    out.push(ACTIONS["edit-text"]);
  }
  if (selection.kind === "table") {
    out.push(ACTIONS["add-column"]);
  }
  if (selection.kind === "dl") {
    out.push(ACTIONS["add-computed-value"]);
  }
  if (!isRoot) {
    out.push(ACTIONS["remove"]);
  }
  return out;
}
