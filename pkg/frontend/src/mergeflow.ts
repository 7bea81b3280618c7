/** The merge flow: drive the service's resumable merge, surfacing each
 * conflict as a modal state until the outcome lands; closing the modal
 * aborts the merge and clears the service's pending state. */

import type { ApiClient, MergeStep } from "./api.js";
import type { Choice, ConflictWire, MergeComplete } from "./types.js";

export type MergeState =
  | { phase: "idle" }
  | { phase: "merging" }
  | { phase: "conflict"; conflict: ConflictWire }
  | { phase: "done"; result: MergeComplete }
  | { phase: "aborted" };

export class MergeFlow {
  state: MergeState = { phase: "idle" };
  /** How many times a conflict modal was shown during the last run. */
  promptCount = 0;

  constructor(
    private api: ApiClient,
    private docId: string,
  ) {}

  async start(replicaA: string, replicaB: string): Promise<MergeState> {
    this.promptCount = 0;
    this.state = { phase: "merging" };
    const step = await this.api.startMerge(this.docId, replicaA, replicaB);
    return this.absorb(step);
  }

  async choose(choice: Choice): Promise<MergeState> {
    if (this.state.phase !== "conflict") {
      throw new Error("no conflict outstanding");
    }
    const step = await this.api.resolveConflict(
      this.docId,
      this.state.conflict.conflictId,
      choice,
    );
    return this.absorb(step);
  }

  async abort(): Promise<MergeState> {
    if (this.state.phase === "conflict" || this.state.phase === "merging") {
      await this.api.abortMerge(this.docId);
    }
    this.state = { phase: "aborted" };
    return this.state;
  }

  private absorb(step: MergeStep): MergeState {
    if (step.kind === "conflict") {
      this.promptCount += 1;
      this.state = { phase: "conflict", conflict: step.conflict };
    } else {
      this.state = { phase: "done", result: step.result };
    }
    return this.state;
  }
}
