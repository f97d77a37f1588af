import { PNG } from "pngjs";

import { GLYPHS, GLYPH_HEIGHT, GLYPH_WIDTH } from "./font.js";

export interface Color {
  r: number;
  g: number;
  b: number;
}

export const BACKGROUND: Color = { r: 24, g: 24, b: 28 };

/** Plain RGBA raster with just enough drawing primitives for annotations. */
export class RasterCanvas {
  readonly width: number;
  readonly height: number;
  readonly data: Buffer;

  private constructor(width: number, height: number, data: Buffer) {
    this.width = width;
    this.height = height;
    this.data = data;
  }

  static blank(width: number, height: number, fill: Color = BACKGROUND): RasterCanvas {
    const data = Buffer.alloc(width * height * 4);
    for (let i = 0; i < width * height; i++) {
      data[i * 4] = fill.r;
      data[i * 4 + 1] = fill.g;
      data[i * 4 + 2] = fill.b;
      data[i * 4 + 3] = 255;
    }
    return new RasterCanvas(width, height, data);
  }

  static fromPng(buffer: Buffer): RasterCanvas {
    const png = PNG.sync.read(buffer);
    return new RasterCanvas(png.width, png.height, png.data);
  }

  toPng(): Buffer {
    const png = new PNG({ width: this.width, height: this.height });
    this.data.copy(png.data);
    return PNG.sync.write(png);
  }

  setPixel(x: number, y: number, color: Color): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    this.data[i] = color.r;
    this.data[i + 1] = color.g;
    this.data[i + 2] = color.b;
    this.data[i + 3] = 255;
  }

  pixel(x: number, y: number): Color {
    const i = (y * this.width + x) * 4;
    return { r: this.data[i], g: this.data[i + 1], b: this.data[i + 2] };
  }

  fillRect(left: number, top: number, right: number, bottom: number, color: Color): void {
    for (let y = top; y < bottom; y++) {
      for (let x = left; x < right; x++) {
        this.setPixel(x, y, color);
      }
    }
  }

  /** Rectangle outline drawn just inside the given edges. */
  rectOutline(
    left: number,
    top: number,
    right: number,
    bottom: number,
    color: Color,
    thickness = 2,
  ): void {
    this.fillRect(left, top, right, top + thickness, color);
    this.fillRect(left, bottom - thickness, right, bottom, color);
    this.fillRect(left, top, left + thickness, bottom, color);
    this.fillRect(right - thickness, top, right, bottom, color);
  }

  disc(cx: number, cy: number, radius: number, color: Color): void {
    for (let y = cy - radius; y <= cy + radius; y++) {
      for (let x = cx - radius; x <= cx + radius; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= radius * radius) {
          this.setPixel(x, y, color);
        }
      }
    }
  }

  text(label: string, x: number, y: number, color: Color, scale = 1): void {
    let cursor = x;
    for (const raw of label.toUpperCase()) {
      const glyph = GLYPHS[raw] ?? GLYPHS[" "];
      for (let row = 0; row < GLYPH_HEIGHT; row++) {
        for (let col = 0; col < GLYPH_WIDTH; col++) {
          if ((glyph[row] >> (GLYPH_WIDTH - 1 - col)) & 1) {
            for (let sy = 0; sy < scale; sy++) {
              for (let sx = 0; sx < scale; sx++) {
                this.setPixel(cursor + col * scale + sx, y + row * scale + sy, color);
              }
            }
          }
        }
      }
      cursor += (GLYPH_WIDTH + 1) * scale;
    }
  }

  clampX(x: number): number {
    return Math.min(Math.max(x, 0), this.width - 1);
  }

  clampY(y: number): number {
    return Math.min(Math.max(y, 0), this.height - 1);
  }
}
