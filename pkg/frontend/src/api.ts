/** Thin fetch client for the blockmerge HTTP service. */

import type {
  Choice,
  ConflictWire,
  DocPayload,
  EditOp,
  EditResponse,
  MergeComplete,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`service error ${status}: ${JSON.stringify(detail)}`);
  }
}

export type MergeStep =
  | { kind: "complete"; result: MergeComplete }
  | { kind: "conflict"; conflict: ConflictWire };

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = response.status === 204 ? null : await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, (body as { detail?: unknown })?.detail ?? body);
    }
    return body;
  }

  createDoc(docId: string, body: Record<string, unknown> = {}): Promise<unknown> {
    return this.request(`/docs/${docId}`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  getDoc(docId: string, replica?: string): Promise<DocPayload> {
    const query = replica ? `?replica=${encodeURIComponent(replica)}` : "";
    return this.request(`/docs/${docId}${query}`) as Promise<DocPayload>;
  }

  postEdit(docId: string, replica: string, op: EditOp): Promise<EditResponse> {
    return this.request(`/docs/${docId}/edits`, {
      method: "POST",
      body: JSON.stringify({ replica, op }),
    }) as Promise<EditResponse>;
  }

  /** Start a merge; a 409 carrying a conflict is a step, not an error. */
  async startMerge(docId: string, a: string, b: string): Promise<MergeStep> {
    return this.mergeRequest(`/docs/${docId}/merge`, { a, b });
  }

  async resolveConflict(
    docId: string,
    conflictId: string,
    choice: Choice,
  ): Promise<MergeStep> {
    return this.mergeRequest(`/docs/${docId}/merge/${conflictId}`, choice);
  }

  private async mergeRequest(
    path: string,
    body: unknown,
  ): Promise<MergeStep> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = (await response.json()) as Record<string, unknown>;
    if (response.status === 409 && payload["conflict"]) {
      return { kind: "conflict", conflict: payload["conflict"] as ConflictWire };
    }
    if (!response.ok) {
      throw new ApiError(response.status, payload["detail"] ?? payload);
    }
    return { kind: "complete", result: payload as unknown as MergeComplete };
  }

  abortMerge(docId: string): Promise<unknown> {
    return this.request(`/docs/${docId}/merge`, { method: "DELETE" });
  }

  async dirtySince(docId: string, version: string): Promise<string[]> {
    const body = (await this.request(
      `/docs/${docId}/dirty?since=${encodeURIComponent(version)}`,
    )) as { dirty: string[] };
    return body.dirty;
  }
}
