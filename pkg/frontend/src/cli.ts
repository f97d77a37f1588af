#!/usr/bin/env node
// viz: render annotated PNGs from analysis result files.
//
//   viz outer <result.json> --width W --height H --out DIR [--frames-dir DIR]
//   viz inner <result.json> --width W --height H --out DIR [--frames-dir DIR]
//
// One PNG per frame entry, named <video>_<frame>.png. By default frames are
// drawn on a blank canvas (result files carry no pixels); --frames-dir
// overlays annotations onto caller-supplied images with matching names.

import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { basename, join } from "node:path";
import process from "node:process";

import { RasterCanvas } from "./canvas.js";
import { renderInnerFrame, renderOuterFrame } from "./render.js";
import { SchemaError, parseInnerResult, parseOuterResult } from "./schema.js";

interface Args {
  mode: "outer" | "inner";
  resultPath: string;
  width: number;
  height: number;
  outDir: string;
  framesDir?: string;
}

class UsageError extends Error {}

export function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  const options = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const value = argv[++i];
      if (value === undefined) throw new UsageError(`missing value for ${arg}`);
      options.set(arg.slice(2), value);
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 2 || (positional[0] !== "outer" && positional[0] !== "inner")) {
    throw new UsageError(
      "usage: viz outer|inner <result.json> --width W --height H --out DIR [--frames-dir DIR]",
    );
  }
  const need = (name: string): string => {
    const value = options.get(name);
    if (value === undefined) throw new UsageError(`--${name} is required`);
    return value;
  };
  const width = Number(need("width"));
  const height = Number(need("height"));
  if (!Number.isInteger(width) || width <= 0 || !Number.isInteger(height) || height <= 0) {
    throw new UsageError("--width and --height must be positive integers");
  }
  return {
    mode: positional[0],
    resultPath: positional[1],
    width,
    height,
    outDir: need("out"),
    framesDir: options.get("frames-dir"),
  };
}

function loadBackground(args: Args, imageName: string): RasterCanvas | undefined {
  if (!args.framesDir) return undefined;
  const path = join(args.framesDir, imageName);
  if (!existsSync(path)) return undefined;
  return RasterCanvas.fromPng(readFileSync(path));
}

export function runViz(args: Args): number {
  const videoName = basename(args.resultPath).replace(/\.json$/, "");
  const text = readFileSync(args.resultPath, "utf-8");
  mkdirSync(args.outDir, { recursive: true });
  let count = 0;
  if (args.mode === "outer") {
    for (const entry of parseOuterResult(text)) {
      const imageName = `${videoName}_${entry.frame}.png`;
      const canvas = renderOuterFrame(
        entry, args.width, args.height, loadBackground(args, imageName),
      );
      writeFileSync(join(args.outDir, imageName), canvas.toPng());
      count++;
    }
  } else {
    for (const entry of parseInnerResult(text)) {
      const imageName = `${videoName}_${entry.frame}.png`;
      const canvas = renderInnerFrame(
        entry, args.width, args.height, loadBackground(args, imageName),
      );
      writeFileSync(join(args.outDir, imageName), canvas.toPng());
      count++;
    }
  }
  console.log(`wrote ${count} image(s) to ${args.outDir}`);
  return count;
}

export function main(argv: string[]): number {
  try {
    runViz(parseArgs(argv));
    return 0;
  } catch (err) {
    if (err instanceof UsageError || err instanceof SchemaError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && "code" in err && err.code === "ENOENT") {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
