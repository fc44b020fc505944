// Planar geometry helpers shared by the tracing canvas and live previews.
// All inputs are pixel coordinates; unit conversion happens at the callers.

export type Point = [number, number];

export function polygonAreaPx(polygon: Point[]): number {
  if (polygon.length < 3) {
    throw new Error(`polygon needs at least 3 points, got ${polygon.length}`);
  }
  let total = 0;
  for (let i = 0; i < polygon.length; i++) {
    const [x1, y1] = polygon[i];
    const [x2, y2] = polygon[(i + 1) % polygon.length];
    total += x1 * y2 - x2 * y1;
  }
  return Math.abs(total) / 2;
}

export function polygonPerimeterPx(polygon: Point[]): number {
  if (polygon.length < 3) {
    throw new Error(`polygon needs at least 3 points, got ${polygon.length}`);
  }
  let total = 0;
  for (let i = 0; i < polygon.length; i++) {
    const [x1, y1] = polygon[i];
    const [x2, y2] = polygon[(i + 1) % polygon.length];
    total += Math.hypot(x2 - x1, y2 - y1);
  }
  return total;
}

export function polylineLengthPx(points: Point[]): number {
  if (points.length < 2) {
    throw new Error(`polyline needs at least 2 points, got ${points.length}`);
  }
  let total = 0;
  for (let i = 1; i < points.length; i++) {
    total += Math.hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1]);
  }
  return total;
}

/** Measurement previews in microns, matching the server-side pipeline. */
export function areaUm2(polygon: Point[], pxPerMicron: number): number {
  return polygonAreaPx(polygon) / (pxPerMicron * pxPerMicron);
}

export function perimeterUm(polygon: Point[], pxPerMicron: number): number {
  return polygonPerimeterPx(polygon) / pxPerMicron;
}

/** Closest point on segment ab to p, with its distance. */
export function projectOntoSegment(p: Point, a: Point, b: Point): { point: Point; distance: number } {
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const segSq = dx * dx + dy * dy;
  const t = segSq === 0 ? 0 : Math.max(0, Math.min(1, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / segSq));
  const point: Point = [a[0] + t * dx, a[1] + t * dy];
  return { point, distance: Math.hypot(p[0] - point[0], p[1] - point[1]) };
}

/** Closest point on an open polyline to p (used to snap branch anchors). */
export function projectOntoPolyline(p: Point, polyline: Point[]): { point: Point; distance: number } {
  if (polyline.length < 2) {
    throw new Error("polyline needs at least 2 points");
  }
  let best = projectOntoSegment(p, polyline[0], polyline[1]);
  for (let i = 1; i < polyline.length - 1; i++) {
    const candidate = projectOntoSegment(p, polyline[i], polyline[i + 1]);
    if (candidate.distance < best.distance) {
      best = candidate;
    }
  }
  return best;
}
