import { describe, expect, it } from "vitest";

import { IdAlloc } from "../src/alloc.js";
import {
  FIRST_WORD_ASC,
  addListItem,
  refactorListToTable,
  sortList,
  sortPermutation,
} from "../src/editbuilders.js";
import type { DocNode } from "../src/types.js";

const li = (id: string, text: string): DocNode => ({
  id,
  kind: "li",
  text,
  children: [],
});

const speakers: DocNode = {
  id: "base:3",
  kind: "ul",
  userId: "speakers",
  children: [
    li("base:4", "Adele Goldberg, adele@xerox.com"),
    li("base:5", "Margaret Hamilton, hamilton@mit.com"),
    li("base:6", "Betty Jean Jennings, betty@rand.com"),
    li("A:0", "Ada Lovelace, lovelace@rsoc.ac.uk"),
  ],
};

describe("edit builders", () => {
  it("appends new list items at the end", () => {
    const alloc = new IdAlloc("A");
    alloc.seedFrom(speakers);
    const op = addListItem(speakers, "Grace Hopper, gh@navy.mil", alloc);
    expect(op).toMatchObject({ type: "insert", parent: "base:3", position: 4 });
    if (op.type === "insert") {
      expect(op.spec.newId).toBe("A:1"); // seeded past the existing A:0
    }
  });

  it("sorts by first word, case-insensitively, stably", () => {
    const perm = sortPermutation(speakers, FIRST_WORD_ASC);
    expect(perm).toEqual(["A:0", "base:4", "base:6", "base:5"]);
    const op = sortList(speakers);
    expect(op).toMatchObject({ type: "sort-children", target: "base:3" });
  });

  it("builds the full refactoring expansion", () => {
    const alloc = new IdAlloc("B");
    const op = refactorListToTable(
      speakers,
      { separator: ",", headers: ["Name", "Email", "Organizer"], defaultText: "" },
      alloc,
    );
    expect(op.type).toBe("refactor-list-to-table");
    if (op.type !== "refactor-list-to-table") return;
    const types = op.expansion.map((p) => p.type);
    expect(types).toEqual([
      "change-kind", // ul -> table
      "wrap-children", // tbody
      "change-kind",
      "change-kind",
      "change-kind",
      "change-kind", // 4 rows li -> tr
      "split-value",
      "split-value",
      "split-value",
      "split-value",
      "insert", // header row
      "add-column", // Organizer
    ]);
    const header = op.expansion.find((p) => p.type === "insert");
    if (header?.type === "insert") {
      expect(header.position).toBe(0);
      expect(header.spec.children?.map((c) => c.text)).toEqual(["Name", "Email"]);
    }
    const column = op.expansion.find((p) => p.type === "add-column");
    if (column?.type === "add-column") {
      expect(column.header).toBe("Organizer");
      expect(column.cellIds).toHaveLength(5); // header row + 4 data rows
    }
    // every minted id is unique
    const minted = new Set<string>();
    for (const prim of op.expansion) {
      if (prim.type === "wrap-children") minted.add(prim.wrapperId);
      if (prim.type === "split-value") prim.cellIds.forEach((c) => minted.add(c));
      if (prim.type === "insert") {
        minted.add(prim.spec.newId);
        prim.spec.children?.forEach((c) => minted.add(c.newId));
      }
      if (prim.type === "add-column") prim.cellIds.forEach(([, c]) => minted.add(c));
    }
    expect(minted.size).toBe(1 + 8 + 3 + 5);
  });
});
