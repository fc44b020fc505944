// Neurite thickness probe: contrast ray-casting over frame intensities,
// mirroring the server's measurement so overlays and reports agree.

import type { Point } from "./geometry.js";

export interface IntensityGrid {
  width: number;
  height: number;
  /** Row-major intensities scaled to [0, 1]. */
  pixels: Float64Array | number[];
}

export interface DiameterResult {
  radiusPx: number;
  diameterUm: number;
  triggerPoints: Point[];
}

// 8 compass rays as (dx, dy) steps, y increasing downward.
const COMPASS_RAYS: Point[] = [
  [1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1],
];

export function neuriteDiameter(
  grid: IntensityGrid,
  point: Point,
  pxPerMicron: number,
  contrastCutoff = 0.04,
  maxRadius = 20,
): DiameterResult | null {
  const x = Math.trunc(point[0]);
  const y = Math.trunc(point[1]);
  if (x < 0 || x >= grid.width || y < 0 || y >= grid.height) {
    throw new Error(`probe point (${x}, ${y}) outside ${grid.width}x${grid.height} image`);
  }
  const at = (px: number, py: number) => grid.pixels[py * grid.width + px] as number;
  const ref = at(x, y);
  const denom = Math.max(ref, 1e-12);

  let best = Infinity;
  const triggers: Point[] = [];
  for (const [dx, dy] of COMPASS_RAYS) {
    const stepLen = Math.hypot(dx, dy);
    for (let r = 1; r <= maxRadius; r++) {
      const qx = x + r * dx;
      const qy = y + r * dy;
      if (qx < 0 || qx >= grid.width || qy < 0 || qy >= grid.height) {
        break;
      }
      if (Math.abs(at(qx, qy) - ref) / denom >= contrastCutoff) {
        triggers.push([qx, qy]);
        best = Math.min(best, r * stepLen);
        break;
      }
    }
  }
  if (triggers.length === 0) {
    return null;
  }
  return {
    radiusPx: best,
    diameterUm: (2 * best) / pxPerMicron,
    triggerPoints: triggers,
  };
}

/** Adapt canvas ImageData (RGBA bytes) to an intensity grid. */
export function gridFromImageData(image: ImageData): IntensityGrid {
  const pixels = new Float64Array(image.width * image.height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = image.data[i * 4] / 255; // grayscale frames: R == G == B
  }
  return { width: image.width, height: image.height, pixels };
}
