/** One replica pane: fetched document state, a selection, the local
 * uncommitted edit count, and palette-action dispatch. The pane never
 * mutates document JSON itself; every state change is a service round-trip. */

import type { ApiClient } from "./api.js";
import { ApiError } from "./api.js";
import { IdAlloc } from "./alloc.js";
import {
  addColumn,
  addComputedValue,
  addListItem,
  editText,
  refactorListToTable,
  removeNode,
  sortList,
} from "./editbuilders.js";
import type { ActionId } from "./palette.js";
import { paletteActions } from "./palette.js";
import type { DocNode, DocPayload, EditOp } from "./types.js";
import { findNode } from "./types.js";

export interface ActionInputs {
  text?: string;
  separator?: string;
  headers?: string[];
  default?: string;
  header?: string;
  formula?: string;
}

export class PaneController {
  doc: DocNode | null = null;
  version = "";
  renderText = "";
  selection: string | null = null;
  localEdits = 0;
  lastError: string | null = null;
  readonly alloc: IdAlloc;

  constructor(
    private api: ApiClient,
    private docId: string,
    readonly replica: string,
  ) {
    this.alloc = new IdAlloc(replica);
  }

  async refresh(): Promise<void> {
    const payload = await this.api.getDoc(this.docId, this.replica);
    this.adopt(payload);
  }

  private adopt(payload: DocPayload): void {
    this.doc = payload.document;
    this.version = payload.version;
    this.renderText = payload.render;
    this.alloc.seedFrom(payload.document);
    if (this.selection && !findNode(payload.document, this.selection)) {
      this.selection = null;
    }
  }

  select(nodeId: string | null): void {
    this.selection = nodeId;
  }

  selectedNode(): DocNode | null {
    if (!this.doc || !this.selection) return null;
    return findNode(this.doc, this.selection);
  }

  availableActions() {
    const node = this.selectedNode();
    return paletteActions(node, node?.id === this.doc?.id);
  }

  /** Build the EditOp for a palette action and post it; 422 reasons land in
   * lastError instead of throwing. Returns the dirty ids on success. */
  async runAction(action: ActionId, inputs: ActionInputs = {}): Promise<string[] | null> {
    const node = this.selectedNode();
    if (!this.doc || !node) {
      this.lastError = "nothing selected";
      return null;
    }
    const op = this.buildOp(action, node, inputs);
    if (op === null) return null;
    return this.postOp(op);
  }

  private buildOp(action: ActionId, node: DocNode, inputs: ActionInputs): EditOp | null {
    switch (action) {
      case "add-list-item":
        return addListItem(node, inputs.text ?? "", this.alloc);
      case "edit-text":
        return editText(node, inputs.text ?? "");
      case "remove":
        return removeNode(node);
      case "sort-list":
        return sortList(node);
      case "refactor-list-to-table":
        return refactorListToTable(
          node,
          {
            separator: inputs.separator ?? ",",
            headers: inputs.headers ?? [],
            defaultText: inputs.default ?? "",
          },
          this.alloc,
        );
      case "add-column":
        return addColumn(node, inputs.header ?? "", inputs.default ?? "", this.alloc);
      case "add-computed-value":
        return addComputedValue(node, inputs.formula ?? "", this.alloc);
      default:
        this.lastError = `unknown action ${action}`;
        return null;
    }
  }

  async postOp(op: EditOp): Promise<string[] | null> {
    try {
      const response = await this.api.postEdit(this.docId, this.replica, op);
      this.adopt(response);
      this.localEdits += 1;
      this.lastError = null;
      return response.dirty;
    } catch (error) {
      if (error instanceof ApiError) {
        const detail = error.detail as { reason?: string } | string;
        this.lastError =
          typeof detail === "object" && detail?.reason
            ? detail.reason
            : String(detail);
        return null;
      }
      throw error;
    }
  }
}
