/** Browser wiring: two replica panes, palette, merge button, conflict modal,
 * and three-second highlights on recomputed values. */

import { ApiClient } from "./api.js";
import { HighlightSet } from "./highlight.js";
import { MergeFlow } from "./mergeflow.js";
import { PaneController, type ActionInputs } from "./pane.js";
import type { ActionId } from "./palette.js";
import type { DocNode } from "./types.js";

const DOC_ID = "demo";
const api = new ApiClient("");
const highlights = new HighlightSet();
const panes = [
  new PaneController(api, DOC_ID, "A"),
  new PaneController(api, DOC_ID, "B"),
];
const mergeFlow = new MergeFlow(api, DOC_ID);

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderNode(pane: PaneController, node: DocNode): HTMLElement {
  const isComputed = node.kind === "computed-value";
  const box = el("div", `node kind-${node.kind}`);
  box.dataset["nodeId"] = node.id;
  if (pane.selection === node.id) box.classList.add("selected");
  if (highlights.isHighlighted(node.id)) box.classList.add("dirty-flash");
  const label = el(
    "span",
    "node-label",
    isComputed ? (node.text ?? node.formula ?? "") : (node.text ?? node.kind),
  );
  if (isComputed && node.formula) label.title = node.formula; // source on hover
  box.appendChild(label);
  box.addEventListener("click", (event) => {
    event.stopPropagation();
    pane.select(node.id);
    draw();
  });
  for (const child of node.children) {
    box.appendChild(renderNode(pane, child));
  }
  return box;
}

function promptInputs(action: ActionId, prompts: string[]): ActionInputs | null {
  const inputs: ActionInputs = {};
  for (const field of prompts) {
    const answer = window.prompt(`${action}: ${field}?`, field === "separator" ? "," : "");
    if (answer === null) return null;
    if (field === "headers") {
      inputs.headers = answer.split(",").map((h) => h.trim()).filter(Boolean);
    } else if (field === "separator") {
      inputs.separator = answer;
    } else if (field === "default") {
      inputs.default = answer;
    } else if (field === "header") {
      inputs.header = answer;
    } else if (field === "formula") {
      inputs.formula = answer;
    } else {
      inputs.text = answer;
    }
  }
  return inputs;
}

function renderPane(pane: PaneController, container: HTMLElement): void {
  container.replaceChildren();
  container.appendChild(el("h2", "pane-title", `Replica ${pane.replica}`));
  if (pane.lastError) {
    container.appendChild(el("div", "error", pane.lastError));
  }
  const paletteBar = el("div", "palette");
  for (const action of pane.availableActions()) {
    const button = el("button", "palette-button", action.label) as HTMLButtonElement;
    button.addEventListener("click", async () => {
      const inputs = promptInputs(action.id, action.prompts);
      if (inputs === null) return;
      const dirty = await pane.runAction(action.id, inputs);
      if (dirty) highlights.flash(dirty);
      draw();
      window.setTimeout(draw, 3100); // let highlights fade
    });
    paletteBar.appendChild(button);
  }
  container.appendChild(paletteBar);
  if (pane.doc) {
    const tree = el("div", "tree");
    for (const child of pane.doc.children) tree.appendChild(renderNode(pane, child));
    tree.addEventListener("click", () => {
      pane.select(null);
      draw();
    });
    container.appendChild(tree);
  }
}

function renderModal(container: HTMLElement): void {
  container.replaceChildren();
  if (mergeFlow.state.phase !== "conflict") {
    container.style.display = "none";
    return;
  }
  container.style.display = "block";
  const conflict = mergeFlow.state.conflict;
  container.appendChild(el("h3", undefined, `Conflict: ${conflict.kind}`));
  const mk = (label: string, run: () => Promise<unknown>) => {
    const button = el("button", "modal-button", label) as HTMLButtonElement;
    button.addEventListener("click", async () => {
      await run();
      await refreshAll();
    });
    container.appendChild(button);
  };
  mk(`A: ${conflict.optionA.description}`, () =>
    mergeFlow.choose({ choice: "take-a" }),
  );
  mk(`B: ${conflict.optionB.description}`, () =>
    mergeFlow.choose({ choice: "take-b" }),
  );
  const custom = el("input", "custom-input") as HTMLInputElement;
  custom.placeholder = "custom value";
  container.appendChild(custom);
  mk("Use custom value", () =>
    mergeFlow.choose({ choice: "custom", payload: custom.value }),
  );
  mk("Close (abort merge)", () => mergeFlow.abort());
}

async function refreshAll(): Promise<void> {
  if (mergeFlow.state.phase === "done") {
    highlights.flash(mergeFlow.state.result.dirty);
  }
  await Promise.all(panes.map((p) => p.refresh()));
  draw();
  window.setTimeout(draw, 3100);
}

function draw(): void {
  renderPane(panes[0]!, document.getElementById("pane-a")!);
  renderPane(panes[1]!, document.getElementById("pane-b")!);
  renderModal(document.getElementById("modal")!);
}

async function boot(): Promise<void> {
  try {
    await api.createDoc(DOC_ID, {});
  } catch {
    // already exists
  }
  document.getElementById("merge-button")!.addEventListener("click", async () => {
    const state = await mergeFlow.start("A", "B");
    if (state.phase === "done") await refreshAll();
    else draw();
  });
  await refreshAll();
}

boot();
