/** End-to-end: a live service, two panes, the conference-organizer scenario.
 *
 * Replica A adds the new speaker and sorts; replica B refactors the list
 * into the Name/Email/Organizer table and fills the organizer cells. The
 * merge must converge both panes on the four-row table with no conflict
 * prompt; a scripted concurrent text edit must then produce exactly one
 * prompt and converge after the choice.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { MergeFlow } from "../src/mergeflow.js";
import { PaneController } from "../src/pane.js";
import { walk, type DocNode } from "../src/types.js";

const REPO = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PORT = 8480 + Math.floor(Math.random() * 400);
const BASE = `http://127.0.0.1:${PORT}`;
const DOC = "e2e";

let server: ChildProcess;
const api = new ApiClient(BASE);
const paneA = new PaneController(api, DOC, "A");
const paneB = new PaneController(api, DOC, "B");
const mergeFlow = new MergeFlow(api, DOC);

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      await fetch(`${BASE}/docs/__ping__`);
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 150));
    }
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "blockmerge.cli", "serve", "--port", `${PORT}`], {
    cwd: REPO,
    stdio: "ignore",
  });
  await waitForService();
  await api.createDoc(DOC, { fixture: "fig2" });
  await paneA.refresh();
  await paneB.refresh();
}, 30_000);

afterAll(() => {
  server?.kill();
});

function byText(doc: DocNode, text: string): DocNode {
  for (const node of walk(doc)) if (node.text === text) return node;
  throw new Error(`no node with text ${JSON.stringify(text)}`);
}

function speakersContainer(doc: DocNode): DocNode {
  for (const node of walk(doc)) if (node.userId === "speakers") return node;
  throw new Error("no speakers container");
}

function rowByName(doc: DocNode, firstName: string): DocNode {
  const table = speakersContainer(doc);
  const tbody = table.children.find((c) => c.kind === "tbody");
  const row = tbody?.children.find((r) =>
    r.children[0]?.text?.startsWith(firstName),
  );
  if (!row) throw new Error(`no row for ${firstName}`);
  return row;
}

describe("two-pane organizer scenario", () => {
  it("both panes converge on the merged table with zero prompts", async () => {
    // Replica A: add the speaker, then sort by first name.
    paneA.select(speakersContainer(paneA.doc!).id);
    expect(paneA.availableActions().map((a) => a.id)).toContain("sort-list");
    await paneA.runAction("add-list-item", {
      text: "Ada Lovelace, lovelace@rsoc.ac.uk",
    });
    expect(paneA.lastError).toBeNull();
    paneA.select(speakersContainer(paneA.doc!).id);
    await paneA.runAction("sort-list");
    expect(paneA.lastError).toBeNull();

    // Replica B: refactor the list into a table, then fill organizer cells.
    paneB.select(speakersContainer(paneB.doc!).id);
    await paneB.runAction("refactor-list-to-table", {
      separator: ",",
      headers: ["Name", "Email", "Organizer"],
      default: "",
    });
    expect(paneB.lastError).toBeNull();
    for (const [name, initials] of [
      ["Adele", "TP"],
      ["Margaret", "JE"],
      ["Betty", "JE"],
    ] as const) {
      const cell = rowByName(paneB.doc!, name).children[2]!;
      paneB.select(cell.id);
      await paneB.runAction("edit-text", { text: initials });
      expect(paneB.lastError).toBeNull();
    }

    const state = await mergeFlow.start("A", "B");
    expect(state.phase).toBe("done");
    expect(mergeFlow.promptCount).toBe(0);

    await paneA.refresh();
    await paneB.refresh();
    const golden = readFileSync(join(REPO, "fixtures", "fig5.txt"), "utf-8").trimEnd();
    expect(paneA.renderText).toBe(golden);
    expect(paneB.renderText).toBe(golden);
    expect(paneA.version).toBe(paneB.version);
  }, 30_000);

  it("a concurrent text edit prompts exactly once and converges", async () => {
    const cellA = rowByName(paneA.doc!, "Ada").children[0]!;
    paneA.select(cellA.id);
    await paneA.runAction("edit-text", { text: "Ada King" });
    expect(paneA.lastError).toBeNull();

    const cellB = rowByName(paneB.doc!, "Ada").children[0]!;
    expect(cellB.id).toBe(cellA.id);
    paneB.select(cellB.id);
    await paneB.runAction("edit-text", { text: "Countess Lovelace" });
    expect(paneB.lastError).toBeNull();

    const midway = await mergeFlow.start("A", "B");
    expect(midway.phase).toBe("conflict");
    if (midway.phase === "conflict") {
      expect(midway.conflict.kind).toBe("concurrent-set-value");
    }
    const done = await mergeFlow.choose({ choice: "take-b" });
    expect(done.phase).toBe("done");
    expect(mergeFlow.promptCount).toBe(1);

    await paneA.refresh();
    await paneB.refresh();
    expect(paneA.renderText).toContain("Countess Lovelace");
    expect(paneA.renderText).toBe(paneB.renderText);
  }, 30_000);

  it("rejects an invalid edit with the service's validation reason", async () => {
    paneB.select(speakersContainer(paneB.doc!).id);
    const result = await paneB.runAction("edit-text", { text: "nope" });
    expect(result).toBeNull();
    expect(paneB.lastError).toBe("not-textual");
  });
});

describe("budget scenario: formulas survive the refactoring", () => {
  const BUDGET_DOC = "e2e-budget";
  const budgetApi = new ApiClient(BASE);
  const editor = new PaneController(budgetApi, BUDGET_DOC, "A");
  const budgetPane = new PaneController(budgetApi, BUDGET_DOC, "B");
  const budgetMerge = new MergeFlow(budgetApi, BUDGET_DOC);

  it("rewrites the count formula and highlights both recomputed values", async () => {
    // The shared base already carries the budget section with its formulas.
    await budgetApi.createDoc(BUDGET_DOC, { fixture: "fig6" });
    await editor.refresh();
    await budgetPane.refresh();

    editor.select(speakersContainer(editor.doc!).id);
    await editor.runAction("add-list-item", {
      text: "Ada Lovelace, lovelace@rsoc.ac.uk",
    });
    editor.select(speakersContainer(editor.doc!).id);
    await editor.runAction("sort-list");
    editor.select(speakersContainer(editor.doc!).id);
    await editor.runAction("refactor-list-to-table", {
      separator: ",",
      headers: ["Name", "Email", "Organizer"],
      default: "",
    });
    expect(editor.lastError).toBeNull();

    const state = await budgetMerge.start("A", "B");
    expect(state.phase).toBe("done");
    expect(budgetMerge.promptCount).toBe(0);
    if (state.phase !== "done") return;

    // Both computed values were invalidated and recomputed: 4 and 4800.
    expect(state.result.dirty).toHaveLength(2);
    const numbers = Object.values(state.result.values)
      .map((v) => (v as { number: number }).number)
      .sort((x, y) => x - y);
    expect(numbers).toEqual([4, 4800]);

    await budgetPane.refresh();
    const formulas = [...walk(budgetPane.doc!)]
      .filter((n) => n.kind === "computed-value")
      .map((n) => n.formula)
      .sort();
    expect(formulas).toEqual([
      "=/dl/dd[0] * /dl/dd[1]",
      "=COUNT(/table[id='speakers']/tbody/tr)",
    ]);
    // The pane shows cached values with the formula source on hover.
    expect(budgetPane.renderText).toContain("4800");
  }, 30_000);
});
