/** Snapshot interpolation: 30 Hz server frames rendered at display rate.
 *
 * The buffer keeps the last two snapshots with their arrival times and
 * samples a view slightly in the past, so rendering always sits between
 * two known states instead of extrapolating.
 */

import type { SnapshotMessage, VehicleView, WalkSignals } from "./protocol.js";

/** How far behind the newest snapshot we render, in ms (~1.5 frames at 30 Hz). */
export const RENDER_DELAY_MS = 50;

export interface ViewFrame {
  score: number;
  timeRemainingS: number;
  pedestrian: { x: number; y: number; gait: string };
  vehicles: VehicleView[];
  walkSignals: WalkSignals;
  /** ms since the newest snapshot arrived — drives the stale-feed banner */
  ageMs: number;
}

export function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/** Interpolate an angle along the shortest arc (radians). */
export function lerpAngle(a: number, b: number, t: number): number {
  let d = (b - a) % (2 * Math.PI);
  if (d > Math.PI) {
    d -= 2 * Math.PI;
  } else if (d < -Math.PI) {
    d += 2 * Math.PI;
  }
  return a + d * t;
}

function lerpVehicles(prev: VehicleView[], next: VehicleView[], t: number): VehicleView[] {
  const before = new Map(prev.map((v) => [v.id, v]));
  return next.map((v) => {
    const p = before.get(v.id);
    if (p === undefined) {
      return v; // just spawned: no earlier sample to blend from
    }
    return {
      id: v.id,
      x: lerp(p.x, v.x, t),
      y: lerp(p.y, v.y, t),
      heading: lerpAngle(p.heading, v.heading, t),
      speed: lerp(p.speed, v.speed, t),
      indicator_on: v.indicator_on,
    };
  });
}

export class SnapshotBuffer {
  private prev: SnapshotMessage | null = null;
  private prevAt = 0;
  private next: SnapshotMessage | null = null;
  private nextAt = 0;

  push(snapshot: SnapshotMessage, atMs: number): void {
    if (this.next !== null && snapshot.tick <= this.next.tick) {
      return; // out-of-order or duplicate frame
    }
    this.prev = this.next;
    this.prevAt = this.nextAt;
    this.next = snapshot;
    this.nextAt = atMs;
  }

  clear(): void {
    this.prev = this.next = null;
    this.prevAt = this.nextAt = 0;
  }

  /** View at wall-clock `nowMs`, or null before the first snapshot. */
  sample(nowMs: number): ViewFrame | null {
    const next = this.next;
    if (next === null) {
      return null;
    }
    const prev = this.prev;
    const ageMs = nowMs - this.nextAt;
    // discrete fields (score, signals, gait flags) always come from the
    // newest frame; only poses are blended
    const base: ViewFrame = {
      score: next.score,
      timeRemainingS: next.time_remaining_s,
      pedestrian: { ...next.pedestrian },
      vehicles: next.vehicles,
      walkSignals: next.walk_signals,
      ageMs,
    };
    if (prev === null || this.nextAt <= this.prevAt) {
      return base;
    }
    const renderAt = nowMs - RENDER_DELAY_MS;
    const t = Math.min(1, Math.max(0, (renderAt - this.prevAt) / (this.nextAt - this.prevAt)));
    return {
      ...base,
      pedestrian: {
        x: lerp(prev.pedestrian.x, next.pedestrian.x, t),
        y: lerp(prev.pedestrian.y, next.pedestrian.y, t),
        gait: next.pedestrian.gait,
      },
      vehicles: lerpVehicles(prev.vehicles, next.vehicles, t),
    };
  }
}
