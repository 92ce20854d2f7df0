import { describe, expect, it } from "vitest";

import { POLE_VIEWS, filterByView } from "../src/poles.js";
import { sixtyImageSession } from "./mockServer.js";

describe("pole view filters", () => {
  const { manifest } = sixtyImageSession();

  it("front view shows exactly poles C, B, A, O, N", () => {
    const front = filterByView(manifest.images, "Front");
    expect(front).toHaveLength(20); // 5 poles x 4 heights
    const poles = new Set(front.map((img) => img.pole));
    expect([...poles].sort()).toEqual(["A", "B", "C", "N", "O"]);
  });

  it("cleared filter shows all 60 thumbnails", () => {
    expect(filterByView(manifest.images, null)).toHaveLength(60);
  });

  it("every named view maps to existing poles", () => {
    const known = new Set(manifest.images.map((img) => img.pole));
    for (const poles of Object.values(POLE_VIEWS)) {
      for (const p of poles) expect(known.has(p)).toBe(true);
    }
  });

  it("unknown view rejected", () => {
    expect(() => filterByView(manifest.images, "Sideways")).toThrow();
  });
});
