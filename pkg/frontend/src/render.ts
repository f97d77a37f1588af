import { Color, RasterCanvas } from "./canvas.js";
import { InnerFrame, OuterFrame } from "./schema.js";

// Red marks hazards/distraction, green marks all-clear.
export const DANGER_COLOR: Color = { r: 220, g: 40, b: 40 };
export const SAFE_COLOR: Color = { r: 40, g: 190, b: 70 };
export const KEYPOINT_COLOR: Color = { r: 80, g: 170, b: 255 };
export const LABEL_COLOR: Color = { r: 235, g: 235, b: 235 };

export const INDICATOR_RADIUS = 16;
export const INDICATOR_CENTER = 24;
const BOX_THICKNESS = 3;
const DOT_RADIUS = 4;

/** Draw hazard boxes and category labels for one outer frame entry. */
export function renderOuterFrame(
  entry: OuterFrame,
  width: number,
  height: number,
  background?: RasterCanvas,
): RasterCanvas {
  const canvas = background ?? RasterCanvas.blank(width, height);
  for (const det of entry.detections) {
    const color = det.danger ? DANGER_COLOR : SAFE_COLOR;
    const left = canvas.clampX(Math.round(det.bbox.left));
    const right = canvas.clampX(Math.round(det.bbox.right));
    const top = canvas.clampY(Math.round(det.bbox.top));
    const bottom = canvas.clampY(Math.round(det.bbox.bottom));
    canvas.rectOutline(left, top, right, bottom, color, BOX_THICKNESS);
    const label = `${det.category} ${det.score.toFixed(2)}`;
    const labelY = top >= 10 ? top - 9 : bottom + 2;
    canvas.text(label, left, labelY, color);
  }
  return canvas;
}

/** Draw keypoint dots, part names, and the distraction indicator disc. */
export function renderInnerFrame(
  entry: InnerFrame,
  width: number,
  height: number,
  background?: RasterCanvas,
): RasterCanvas {
  const canvas = background ?? RasterCanvas.blank(width, height);
  for (const kp of entry.keypoints) {
    // Off-frame model guesses are clamped onto the canvas edge.
    const x = canvas.clampX(Math.round(kp.x));
    const y = canvas.clampY(Math.round(kp.y));
    canvas.disc(x, y, DOT_RADIUS, KEYPOINT_COLOR);
    canvas.text(kp.part, x + DOT_RADIUS + 2, y - 3, LABEL_COLOR);
  }
  const indicator = entry.distracted ? DANGER_COLOR : SAFE_COLOR;
  canvas.disc(INDICATOR_CENTER, INDICATOR_CENTER, INDICATOR_RADIUS, indicator);
  return canvas;
}
