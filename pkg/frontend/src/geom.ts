/** Tiny polyline helpers for drawing route stop lines. */

export interface Pose {
  x: number;
  y: number;
  ux: number;
  uy: number;
}

/** Point and unit tangent at arc length s along a polyline (clamped). */
export function poseAt(points: [number, number][], s: number): Pose {
  if (points.length < 2) {
    const only = points[0] ?? [0, 0];
    return { x: only[0], y: only[1], ux: 1, uy: 0 };
  }
  let remaining = Math.max(0, s);
  for (let i = 0; i + 1 < points.length; i += 1) {
    const [x0, y0] = points[i]!;
    const [x1, y1] = points[i + 1]!;
    const dx = x1 - x0;
    const dy = y1 - y0;
    const len = Math.hypot(dx, dy);
    if (remaining <= len || i + 2 === points.length) {
      const t = len === 0 ? 0 : Math.min(1, remaining / len);
      const ux = len === 0 ? 1 : dx / len;
      const uy = len === 0 ? 0 : dy / len;
      return { x: x0 + dx * t, y: y0 + dy * t, ux, uy };
    }
    remaining -= len;
  }
  const last = points[points.length - 1]!;
  return { x: last[0], y: last[1], ux: 1, uy: 0 };
}
