// Result-file schemas and validation. Outer results are arrays of
// {frame, detections[]}; inner results are arrays of
// {frame, distracted, keypoints[]}. Validation errors name the offending
// field by path, e.g. "[2].detections[0].bbox.top".

export class SchemaError extends Error {}

export interface BBox {
  bottom: number;
  left: number;
  right: number;
  top: number;
}

export interface OuterDetection {
  category: string;
  danger: boolean;
  score: number;
  bbox: BBox;
}

export interface OuterFrame {
  frame: number;
  detections: OuterDetection[];
}

export interface InnerKeypoint {
  part: string;
  score: number;
  x: number;
  y: number;
}

export interface InnerFrame {
  frame: number;
  distracted: boolean;
  keypoints: InnerKeypoint[];
}

function fail(path: string, expected: string): never {
  throw new SchemaError(`${path}: expected ${expected}`);
}

function asObject(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(path, "an object");
  }
  return value as Record<string, unknown>;
}

function asArray(value: unknown, path: string): unknown[] {
  if (!Array.isArray(value)) fail(path, "an array");
  return value;
}

function asNumber(value: unknown, path: string): number {
  if (typeof value !== "number" || Number.isNaN(value)) fail(path, "a number");
  return value;
}

function asBoolean(value: unknown, path: string): boolean {
  if (typeof value !== "boolean") fail(path, "a boolean");
  return value;
}

function asString(value: unknown, path: string): string {
  if (typeof value !== "string") fail(path, "a string");
  return value;
}

function parseDocument(text: string): unknown {
  try {
    return JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`result file is not valid JSON: ${(err as Error).message}`);
  }
}

export function parseOuterResult(text: string): OuterFrame[] {
  const doc = asArray(parseDocument(text), "$");
  return doc.map((entry, i) => {
    const obj = asObject(entry, `[${i}]`);
    const detections = asArray(obj.detections, `[${i}].detections`).map((det, j) => {
      const d = asObject(det, `[${i}].detections[${j}]`);
      const bbox = asObject(d.bbox, `[${i}].detections[${j}].bbox`);
      return {
        category: asString(d.category, `[${i}].detections[${j}].category`),
        danger: asBoolean(d.danger, `[${i}].detections[${j}].danger`),
        score: asNumber(d.score, `[${i}].detections[${j}].score`),
        bbox: {
          bottom: asNumber(bbox.bottom, `[${i}].detections[${j}].bbox.bottom`),
          left: asNumber(bbox.left, `[${i}].detections[${j}].bbox.left`),
          right: asNumber(bbox.right, `[${i}].detections[${j}].bbox.right`),
          top: asNumber(bbox.top, `[${i}].detections[${j}].bbox.top`),
        },
      };
    });
    return { frame: asNumber(obj.frame, `[${i}].frame`), detections };
  });
}

export function parseInnerResult(text: string): InnerFrame[] {
  const doc = asArray(parseDocument(text), "$");
  return doc.map((entry, i) => {
    const obj = asObject(entry, `[${i}]`);
    const keypoints = asArray(obj.keypoints, `[${i}].keypoints`).map((kp, j) => {
      const k = asObject(kp, `[${i}].keypoints[${j}]`);
      return {
        part: asString(k.part, `[${i}].keypoints[${j}].part`),
        score: asNumber(k.score, `[${i}].keypoints[${j}].score`),
        x: asNumber(k.x, `[${i}].keypoints[${j}].x`),
        y: asNumber(k.y, `[${i}].keypoints[${j}].y`),
      };
    });
    return {
      frame: asNumber(obj.frame, `[${i}].frame`),
      distracted: asBoolean(obj.distracted, `[${i}].distracted`),
      keypoints,
    };
  });
}
