import { describe, expect, it } from "vitest";

import { RasterCanvas } from "../src/canvas.js";
import {
  DANGER_COLOR,
  INDICATOR_CENTER,
  KEYPOINT_COLOR,
  SAFE_COLOR,
  renderInnerFrame,
  renderOuterFrame,
} from "../src/render.js";
import { parseOuterResult, parseInnerResult } from "../src/schema.js";

const outerEntry = {
  frame: 0,
  detections: [
    {
      category: "person",
      danger: true,
      score: 0.9,
      bbox: { bottom: 120, left: 40, right: 160, top: 60 },
    },
    {
      category: "car",
      danger: false,
      score: 0.8,
      bbox: { bottom: 300, left: 200, right: 320, top: 240 },
    },
  ],
};

describe("renderOuterFrame", () => {
  it("draws red edges for dangers and green for non-dangers", () => {
    const canvas = renderOuterFrame(outerEntry, 400, 400);
    expect(canvas.pixel(100, 61)).toEqual(DANGER_COLOR); // top edge of danger box
    expect(canvas.pixel(41, 90)).toEqual(DANGER_COLOR); // left edge
    expect(canvas.pixel(260, 241)).toEqual(SAFE_COLOR); // top edge of safe box
    expect(canvas.pixel(319, 270)).toEqual(SAFE_COLOR); // right edge
  });

  it("leaves the box interior untouched", () => {
    const canvas = renderOuterFrame(outerEntry, 400, 400);
    const inside = canvas.pixel(100, 90);
    expect(inside).not.toEqual(DANGER_COLOR);
    expect(inside).not.toEqual(SAFE_COLOR);
  });

  it("mixes red and green boxes in the same image", () => {
    const canvas = renderOuterFrame(outerEntry, 400, 400);
    let red = 0;
    let green = 0;
    for (let y = 0; y < 400; y++) {
      for (let x = 0; x < 400; x++) {
        const p = canvas.pixel(x, y);
        if (p.r === DANGER_COLOR.r && p.g === DANGER_COLOR.g && p.b === DANGER_COLOR.b) red++;
        if (p.r === SAFE_COLOR.r && p.g === SAFE_COLOR.g && p.b === SAFE_COLOR.b) green++;
      }
    }
    expect(red).toBeGreaterThan(0);
    expect(green).toBeGreaterThan(0);
  });

  it("overlays onto a supplied background", () => {
    const background = RasterCanvas.blank(400, 400, { r: 1, g: 2, b: 3 });
    const canvas = renderOuterFrame(outerEntry, 400, 400, background);
    expect(canvas.pixel(5, 5)).toEqual({ r: 1, g: 2, b: 3 });
    expect(canvas.pixel(100, 61)).toEqual(DANGER_COLOR);
  });
});

describe("renderInnerFrame", () => {
  const keypoints = [
    { part: "nose", score: 0.9, x: 200, y: 150 },
    { part: "right_elbow", score: 0.4, x: -40, y: 500 }, // off-canvas guess
  ];

  it("draws a red indicator disc when distracted", () => {
    const canvas = renderInnerFrame(
      { frame: 0, distracted: true, keypoints }, 400, 400,
    );
    expect(canvas.pixel(INDICATOR_CENTER, INDICATOR_CENTER)).toEqual(DANGER_COLOR);
  });

  it("draws a green indicator disc when not distracted", () => {
    const canvas = renderInnerFrame(
      { frame: 0, distracted: false, keypoints }, 400, 400,
    );
    expect(canvas.pixel(INDICATOR_CENTER, INDICATOR_CENTER)).toEqual(SAFE_COLOR);
  });

  it("marks keypoints with dots", () => {
    const canvas = renderInnerFrame(
      { frame: 0, distracted: false, keypoints }, 400, 400,
    );
    expect(canvas.pixel(200, 150)).toEqual(KEYPOINT_COLOR);
  });

  it("clamps off-canvas keypoints to the edge", () => {
    const canvas = renderInnerFrame(
      { frame: 0, distracted: false, keypoints }, 400, 400,
    );
    expect(canvas.pixel(0, 399)).toEqual(KEYPOINT_COLOR);
  });
});

describe("pipeline fixtures parse and render", () => {
  it("renders every frame entry of a real outer result", async () => {
    const { readFileSync } = await import("node:fs");
    const text = readFileSync(new URL("./fixtures/out_0000.json", import.meta.url), "utf-8");
    const entries = parseOuterResult(text);
    expect(entries.length).toBe(5);
    for (const entry of entries) {
      const canvas = renderOuterFrame(entry, 1280, 720);
      expect(canvas.width).toBe(1280);
    }
  });

  it("renders every frame entry of a real inner result", async () => {
    const { readFileSync } = await import("node:fs");
    const text = readFileSync(new URL("./fixtures/in_0000.json", import.meta.url), "utf-8");
    const entries = parseInnerResult(text);
    expect(entries.length).toBe(5);
    const canvas = renderInnerFrame(entries[0], 1280, 720);
    expect(canvas.pixel(INDICATOR_CENTER, INDICATOR_CENTER)).toEqual(DANGER_COLOR);
  });
});
