/**
 * PNG decode/encode plus the pixel-grid operations the trainer needs
 * (horizontal circular shift happens here at native resolution; the
 * evaluation-time variants come pre-rendered through the variant index).
 */

import { PNG } from "pngjs";

export interface Pixels {
  width: number;
  height: number;
  /** RGBA, row-major, 4 bytes per pixel (pngjs layout). */
  data: Uint8Array;
}

export function decodePng(buffer: Buffer): Pixels {
  const png = PNG.sync.read(buffer);
  return { width: png.width, height: png.height, data: new Uint8Array(png.data) };
}

export function encodePng(pixels: Pixels): Buffer {
  const png = new PNG({ width: pixels.width, height: pixels.height });
  png.data = Buffer.from(pixels.data);
  return PNG.sync.write(png);
}

/** Output column x reads input column (x + delta) mod W. */
export function circularShift(img: Pixels, delta: number): Pixels {
  const { width, height, data } = img;
  const d = ((delta % width) + width) % width;
  const out = new Uint8Array(data.length);
  for (let y = 0; y < height; y++) {
    const row = y * width * 4;
    for (let x = 0; x < width; x++) {
      const src = row + ((x + d) % width) * 4;
      const dst = row + x * 4;
      out[dst] = data[src];
      out[dst + 1] = data[src + 1];
      out[dst + 2] = data[src + 2];
      out[dst + 3] = data[src + 3];
    }
  }
  return { width, height, data: out };
}

/**
 * Mean-pooled RGB cell grid, centered to [-0.5, 0.5]: the toy encoder's
 * "preprocessing".  Feature layout: (row, column, channel), row-major.
 */
export function gridFeatures(
  img: Pixels,
  gridRows: number,
  gridCols: number,
): Float64Array {
  const { width, height, data } = img;
  const out = new Float64Array(gridRows * gridCols * 3);
  const counts = new Float64Array(gridRows * gridCols);
  for (let y = 0; y < height; y++) {
    const gy = Math.min(Math.floor((y * gridRows) / height), gridRows - 1);
    for (let x = 0; x < width; x++) {
      const gx = Math.min(Math.floor((x * gridCols) / width), gridCols - 1);
      const cell = gy * gridCols + gx;
      const px = (y * width + x) * 4;
      out[cell * 3] += data[px];
      out[cell * 3 + 1] += data[px + 1];
      out[cell * 3 + 2] += data[px + 2];
      counts[cell] += 1;
    }
  }
  for (let cell = 0; cell < counts.length; cell++) {
    for (let c = 0; c < 3; c++) {
      out[cell * 3 + c] = out[cell * 3 + c] / (255.0 * counts[cell]) - 0.5;
    }
  }
  return out;
}
