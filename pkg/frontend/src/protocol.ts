/** Wire types for the session protocol, plus strict parsing of inbound frames.
 *
 * The server is authoritative: everything the client knows arrives in these
 * messages. Vehicles carry no behavior label — only `indicator_on`.
 */

export const PROTOCOL_VERSION = 1;

// -- client -> server --------------------------------------------------------

export interface HelloMessage {
  type: "hello";
  protocol_version: number;
  participant_label?: string;
}

export interface StartMessage {
  type: "start";
  scenario?: number | string;
  config?: string;
  seed?: number;
}

export interface InputMessage {
  type: "input";
  seq: number;
  move_x: number;
  move_y: number;
  run: boolean;
}

export interface RestartMessage {
  type: "restart";
}

export type ClientMessage = HelloMessage | StartMessage | InputMessage | RestartMessage;

// -- server -> client --------------------------------------------------------

export interface ScenarioRow {
  id: number | string;
  name: string;
  indicator: boolean;
}

export interface WelcomeMessage {
  type: "welcome";
  protocol_version: number;
  scenarios: ScenarioRow[];
}

export interface MapPayload {
  bounds: [number, number, number, number];
  road_half_width_m: number;
  zones: Record<string, [number, number, number, number]>;
  crosswalks: Record<string, [number, number, number, number]>;
  routes: { id: string; points: [number, number][]; s_stop_m: number }[];
}

export interface StartedMessage {
  type: "started";
  session_id: string;
  seed: number;
  config: Record<string, unknown>;
  map: MapPayload;
}

export interface VehicleView {
  id: number;
  x: number;
  y: number;
  heading: number;
  speed: number;
  indicator_on: boolean;
}

export interface WalkSignals {
  N: boolean;
  S: boolean;
  E: boolean;
  W: boolean;
}

export interface SnapshotMessage {
  type: "snapshot";
  tick: number;
  score: number;
  time_remaining_s: number;
  pedestrian: { x: number; y: number; gait: string };
  vehicles: VehicleView[];
  walk_signals: WalkSignals;
}

export interface EndedMessage {
  type: "ended";
  reason: string;
  final_score: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  message: string;
}

export type ServerMessage =
  | WelcomeMessage
  | StartedMessage
  | SnapshotMessage
  | EndedMessage
  | ErrorMessage;

const SERVER_TYPES = new Set(["welcome", "started", "snapshot", "ended", "error"]);

/** Parse one inbound frame; null for anything that is not a known message. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) {
    return null;
  }
  const type = (raw as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) {
    return null;
  }
  return raw as ServerMessage;
}

export function helloMessage(participant: string): HelloMessage {
  const msg: HelloMessage = { type: "hello", protocol_version: PROTOCOL_VERSION };
  if (participant !== "") {
    msg.participant_label = participant;
  }
  return msg;
}

/** Build a Start for a scenario row; a non-empty seed field is passed through. */
export function startMessage(scenario: number | string, seedText: string): StartMessage {
  const msg: StartMessage = { type: "start", scenario };
  const trimmed = seedText.trim();
  if (trimmed !== "") {
    const seed = Number(trimmed);
    if (Number.isInteger(seed) && seed >= 0) {
      msg.seed = seed;
    }
  }
  return msg;
}
