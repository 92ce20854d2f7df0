import { beforeEach, describe, expect, it } from "vitest";

import { App, lesionFocusPose } from "../src/app.js";
import type { FocusPose } from "../src/app.js";
import { MockServer } from "./mockServer.js";

describe("lesionFocusPose", () => {
  it("offsets the camera along the unit normal", () => {
    const pose = lesionFocusPose([1, 2, 3], [0, 0, 2], 0.4);
    expect(pose.position).toEqual([1, 2, 3.4]);
    expect(pose.target).toEqual([1, 2, 3]);
  });

  it("normalizes non-unit normals", () => {
    const pose = lesionFocusPose([0, 0, 0], [3, 0, 4], 1.0);
    expect(pose.position[0]).toBeCloseTo(0.6, 12);
    expect(pose.position[2]).toBeCloseTo(0.8, 12);
  });
});

describe("scripted review interaction", () => {
  let server: MockServer;
  let app: App;
  let focusLog: FocusPose[];
  let errors: string[];

  beforeEach(async () => {
    server = new MockServer();
    focusLog = [];
    errors = [];
    app = new App(server, {
      onFocus: (pose) => focusLog.push(pose),
      onError: (msg) => errors.push(msg),
    });
    await app.openSession("demo");
  });

  it("select thumbnail -> click bbox -> 3D focus -> remove -> reload", async () => {
    // 1. select a thumbnail
    app.selectThumbnail("A2");
    expect(app.store.selection.imageId).toBe("A2");

    // 2. click inside a bbox: selection propagates to every panel
    app.selectDetection("A2", 0);
    const sel = app.store.selection;
    expect(sel.detection).toEqual({ imageId: "A2", detId: 0 });
    expect(sel.lesionId).toBe(1); // the containing global lesion
    app.store.assertCoherent();

    // 3. the 3D view was asked to focus on centroid + k * normal
    expect(focusLog).toHaveLength(1);
    const expected = lesionFocusPose(
      [0.12, 1.1, 0.05],
      [0.9, 0.1, 0.42],
      app.cameraOffset,
    );
    expect(focusLog[0]).toEqual(expected);

    // 4. remove the detection: server round trip, then local refresh
    const ok = await app.removeActiveDetection();
    expect(ok).toBe(true);
    expect(server.patchCalls).toEqual([
      { imageId: "A2", detId: 0, patch: { removed: true } },
    ]);
    expect(app.visibleDetections("A2").map((d) => d.det_id)).toEqual([1]);
    expect(app.store.selection.detection).toBeNull();
    app.store.assertCoherent();

    // 5. reload from the server: the removal persisted
    await app.reload();
    expect(app.visibleDetections("A2").map((d) => d.det_id)).toEqual([1]);
    const raw = await server.detections();
    expect(raw["A2"].find((d) => d.det_id === 0)?.removed).toBe(true);
    app.store.assertCoherent();
  });

  it("selecting a 3D marker propagates to image panels", () => {
    app.selectLesionMarker(1);
    const sel = app.store.selection;
    expect(sel.lesionId).toBe(1);
    expect(sel.imageId).toBe("A2"); // first member sighting
    expect(sel.detection).toEqual({ imageId: "A2", detId: 0 });
    app.store.assertCoherent();
    expect(focusLog).toHaveLength(1);
  });

  it("switching image clears a detection from another image", () => {
    app.selectDetection("A2", 0);
    app.selectThumbnail("C1");
    const sel = app.store.selection;
    expect(sel.imageId).toBe("C1");
    expect(sel.detection).toBeNull();
    expect(sel.lesionId).toBeNull();
    app.store.assertCoherent();
  });

  it("notes are sent verbatim and persisted", async () => {
    app.selectDetection("B2", 0);
    const ok = await app.annotateActiveDetection("monitor at next visit");
    expect(ok).toBe(true);
    expect(server.patchCalls[0].patch).toEqual({
      notes: "monitor at next visit",
    });
    expect(app.store.activeDetection()?.notes).toBe("monitor at next visit");
  });

  it("failed PATCH keeps local state unchanged and reports the error", async () => {
    app.selectDetection("A2", 1);
    server.patchDetection = () =>
      Promise.reject(new Error("HTTP 404: unknown detection"));
    const ok = await app.removeActiveDetection();
    expect(ok).toBe(false);
    expect(errors).toHaveLength(1);
    expect(app.store.selection.detection).toEqual({
      imageId: "A2",
      detId: 1,
    });
    expect(app.visibleDetections("A2")).toHaveLength(2);
  });

  it("selection coherence cannot be violated from the outside", () => {
    app.selectDetection("A2", 0);
    expect(() => app.store.selectDetection({ imageId: "A2", detId: 99 }))
      .toThrow(/unknown detection/);
    app.store.assertCoherent();
  });
});
