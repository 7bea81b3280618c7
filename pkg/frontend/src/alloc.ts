/** Client-side NodeId minting for one replica pane. */

import { walk, type DocNode } from "./types.js";

export class IdAlloc {
  private next = 0;

  constructor(private replica: string) {}

  /** Never hand out a counter at or below one already in the document. */
  seedFrom(root: DocNode): void {
    for (const node of walk(root)) {
      const sep = node.id.lastIndexOf(":");
      if (node.id.slice(0, sep) === this.replica) {
        const counter = Number(node.id.slice(sep + 1));
        if (counter >= this.next) this.next = counter + 1;
      }
    }
  }

  fresh(): string {
    return `${this.replica}:${this.next++}`;
  }
}
