/** Top-down canvas view. Pure drawing: reads a ViewFrame and the static map,
 * writes pixels. Game truth stays on the server.
 */

import type { MapPayload } from "./protocol.js";
import type { ViewFrame } from "./interpolate.js";
import { poseAt } from "./geom.js";
import { trafficLightsFromWalk } from "./signals.js";

const VEHICLE_LENGTH = 4.5;
const VEHICLE_WIDTH = 1.8;
const PED_RADIUS = 0.3;

const COLORS = {
  grass: "#2e3d2f",
  pavement: "#6b6f66",
  zone: "rgba(255, 214, 64, 0.14)",
  zoneEdge: "rgba(255, 214, 64, 0.45)",
  road: "#3b3f47",
  laneMark: "#8e94a1",
  crosswalk: "#c9cdd6",
  stopLine: "#e8e8ee",
  vehicle: "#4f7cac",
  vehicleNose: "#d7e3f0",
  indicator: "#35e06a",
  pedWalk: "#f2a541",
  pedRun: "#f25c41",
  pedIdle: "#e8d5b5",
  walkOn: "#35e06a",
  walkOff: "#d9485b",
};

export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Fit world bounds into a canvas, preserving aspect, y flipped to screen. */
export function fitTransform(
  bounds: [number, number, number, number],
  width: number,
  height: number,
): Transform {
  const [x0, y0, x1, y1] = bounds;
  const margin = 0.95;
  const scale = Math.min((width * margin) / (x1 - x0), (height * margin) / (y1 - y0));
  return {
    scale,
    offsetX: width / 2 - ((x0 + x1) / 2) * scale,
    offsetY: height / 2 + ((y0 + y1) / 2) * scale,
  };
}

export function toScreen(t: Transform, x: number, y: number): [number, number] {
  return [t.offsetX + x * t.scale, t.offsetY - y * t.scale];
}

function rect(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  box: [number, number, number, number],
  fill: string,
  stroke?: string,
): void {
  const [sx, sy] = toScreen(t, box[0], box[3]);
  const w = (box[2] - box[0]) * t.scale;
  const h = (box[3] - box[1]) * t.scale;
  ctx.fillStyle = fill;
  ctx.fillRect(sx, sy, w, h);
  if (stroke !== undefined) {
    ctx.strokeStyle = stroke;
    ctx.lineWidth = 1;
    ctx.strokeRect(sx, sy, w, h);
  }
}

function drawStatic(ctx: CanvasRenderingContext2D, t: Transform, map: MapPayload): void {
  const [bx0, by0, bx1, by1] = map.bounds;
  rect(ctx, t, map.bounds, COLORS.grass);
  const rhw = map.road_half_width_m;
  // the two road strips
  rect(ctx, t, [-rhw, by0, rhw, by1], COLORS.road);
  rect(ctx, t, [bx0, -rhw, bx1, rhw], COLORS.road);
  // pavement ring outside the roads
  for (const [cx0, cy0, cx1, cy1] of [
    [rhw, rhw, bx1, by1],
    [bx0, rhw, -rhw, by1],
    [rhw, by0, bx1, -rhw],
    [bx0, by0, -rhw, -rhw],
  ] as [number, number, number, number][]) {
    rect(ctx, t, [cx0, cy0, cx1, cy1], COLORS.pavement);
  }
  // center lane divider dashes
  ctx.strokeStyle = COLORS.laneMark;
  ctx.lineWidth = Math.max(1, 0.15 * t.scale);
  ctx.setLineDash([1.5 * t.scale, 1.8 * t.scale]);
  for (const [ax, ay, bx, by] of [
    [0, rhw, 0, by1],
    [0, by0, 0, -rhw],
    [bx0, 0, -rhw, 0],
    [rhw, 0, bx1, 0],
  ]) {
    ctx.beginPath();
    ctx.moveTo(...toScreen(t, ax!, ay!));
    ctx.lineTo(...toScreen(t, bx!, by!));
    ctx.stroke();
  }
  ctx.setLineDash([]);
  // crosswalk stripes
  for (const arm of Object.keys(map.crosswalks)) {
    const box = map.crosswalks[arm]!;
    const vertical = arm === "E" || arm === "W"; // stripes run across the road
    const span = vertical ? box[3] - box[1] : box[2] - box[0];
    const stripes = Math.max(4, Math.floor(span / 1.1));
    const step = span / stripes;
    ctx.fillStyle = COLORS.crosswalk;
    for (let i = 0; i < stripes; i += 2) {
      if (vertical) {
        rect(ctx, t, [box[0] + 0.15, box[1] + i * step, box[2] - 0.15, box[1] + (i + 1) * step], COLORS.crosswalk);
      } else {
        rect(ctx, t, [box[0] + i * step, box[1] + 0.15, box[0] + (i + 1) * step, box[3] - 0.15], COLORS.crosswalk);
      }
    }
  }
  // scoring zones
  for (const corner of Object.keys(map.zones)) {
    rect(ctx, t, map.zones[corner]!, COLORS.zone, COLORS.zoneEdge);
  }
  // stop lines across each approach lane
  ctx.strokeStyle = COLORS.stopLine;
  ctx.lineWidth = Math.max(2, 0.3 * t.scale);
  for (const route of map.routes) {
    const pose = poseAt(route.points, route.s_stop_m);
    const half = rhw / 4; // half a lane width each side of the centerline
    const [ax, ay] = toScreen(t, pose.x - pose.uy * half, pose.y + pose.ux * half);
    const [bx, by] = toScreen(t, pose.x + pose.uy * half, pose.y - pose.ux * half);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
}

function drawWalkSignals(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  map: MapPayload,
  frame: ViewFrame,
): void {
  for (const arm of ["N", "S", "E", "W"] as const) {
    const box = map.crosswalks[arm];
    if (box === undefined) {
      continue;
    }
    const cx = (box[0] + box[2]) / 2;
    const cy = (box[1] + box[3]) / 2;
    // a lamp on each end of the crosswalk, just off the road
    const across = arm === "N" || arm === "S" ? [1, 0] : [0, 1];
    const reach = (arm === "N" || arm === "S" ? box[2] - box[0] : box[3] - box[1]) / 2 + 1.0;
    ctx.fillStyle = frame.walkSignals[arm] ? COLORS.walkOn : COLORS.walkOff;
    for (const side of [-1, 1]) {
      const [sx, sy] = toScreen(t, cx + across[0]! * reach * side, cy + across[1]! * reach * side);
      ctx.beginPath();
      ctx.arc(sx, sy, Math.max(2.5, 0.45 * t.scale), 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

function drawTrafficLights(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  map: MapPayload,
  frame: ViewFrame,
): void {
  const { nsGreen, ewGreen } = trafficLightsFromWalk(frame.walkSignals);
  const rhw = map.road_half_width_m;
  const offset = rhw + 2.2;
  const lamp = (x: number, y: number, green: boolean): void => {
    const [sx, sy] = toScreen(t, x, y);
    ctx.fillStyle = "#22252b";
    ctx.beginPath();
    ctx.arc(sx, sy, Math.max(4, 0.8 * t.scale), 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = green ? COLORS.walkOn : COLORS.walkOff;
    ctx.beginPath();
    ctx.arc(sx, sy, Math.max(2.5, 0.5 * t.scale), 0, 2 * Math.PI);
    ctx.fill();
  };
  lamp(rhw / 2, -offset, nsGreen); // northbound approach, right of lane
  lamp(-rhw / 2, offset, nsGreen); // southbound
  lamp(-offset, -rhw / 2, ewGreen); // eastbound
  lamp(offset, rhw / 2, ewGreen); // westbound
}

function drawVehicles(ctx: CanvasRenderingContext2D, t: Transform, frame: ViewFrame): void {
  for (const v of frame.vehicles) {
    const [sx, sy] = toScreen(t, v.x, v.y);
    if (v.indicator_on) {
      // green indicator glow beneath the vehicle
      const glow = ctx.createRadialGradient(sx, sy, 0, sx, sy, 3.4 * t.scale);
      glow.addColorStop(0, "rgba(53, 224, 106, 0.55)");
      glow.addColorStop(1, "rgba(53, 224, 106, 0)");
      ctx.fillStyle = glow;
      ctx.beginPath();
      ctx.arc(sx, sy, 3.4 * t.scale, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.save();
    ctx.translate(sx, sy);
    ctx.rotate(-v.heading); // screen y is flipped
    const L = VEHICLE_LENGTH * t.scale;
    const W = VEHICLE_WIDTH * t.scale;
    ctx.fillStyle = COLORS.vehicle;
    ctx.fillRect(-L / 2, -W / 2, L, W);
    ctx.fillStyle = COLORS.vehicleNose;
    ctx.fillRect(L / 2 - 0.2 * t.scale, -W / 2, 0.2 * t.scale, W); // windshield end
    if (v.indicator_on) {
      ctx.fillStyle = COLORS.indicator;
      ctx.fillRect(-0.3 * t.scale, -0.3 * t.scale, 0.6 * t.scale, 0.6 * t.scale);
    }
    ctx.restore();
  }
}

function drawPedestrian(ctx: CanvasRenderingContext2D, t: Transform, frame: ViewFrame): void {
  const p = frame.pedestrian;
  const [sx, sy] = toScreen(t, p.x, p.y);
  const r = Math.max(3, PED_RADIUS * t.scale * 2.2);
  ctx.fillStyle =
    p.gait === "run" ? COLORS.pedRun : p.gait === "walk" ? COLORS.pedWalk : COLORS.pedIdle;
  ctx.beginPath();
  ctx.arc(sx, sy, r, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#1d1f24";
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

function drawHud(ctx: CanvasRenderingContext2D, width: number, frame: ViewFrame): void {
  ctx.fillStyle = "#f4f4f8";
  ctx.textBaseline = "top";
  ctx.textAlign = "right";
  ctx.font = "bold 28px system-ui, sans-serif";
  ctx.fillText(String(frame.score), width - 18, 14); // score, top right
  ctx.textAlign = "center";
  ctx.font = "16px system-ui, sans-serif";
  const s = Math.max(0, frame.timeRemainingS);
  const mm = Math.floor(s / 60);
  const ss = Math.floor(s % 60);
  ctx.fillText(`${mm}:${ss.toString().padStart(2, "0")}`, width / 2, 14);
}

export function renderFrame(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  map: MapPayload,
  frame: ViewFrame,
): void {
  ctx.clearRect(0, 0, width, height);
  const t = fitTransform(map.bounds, width, height);
  drawStatic(ctx, t, map);
  drawWalkSignals(ctx, t, map, frame);
  drawTrafficLights(ctx, t, map, frame);
  drawVehicles(ctx, t, frame);
  drawPedestrian(ctx, t, frame);
  drawHud(ctx, width, frame);
  if (frame.ageMs > 350) {
    ctx.fillStyle = "rgba(20, 22, 28, 0.75)";
    ctx.fillRect(0, height / 2 - 24, width, 48);
    ctx.fillStyle = "#f4f4f8";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.font = "18px system-ui, sans-serif";
    ctx.fillText("reconnecting…", width / 2, height / 2);
  }
}
