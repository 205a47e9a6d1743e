/** Client-side mirror of the session phase machine.
 *
 * A pure reducer over server messages: rendering and sockets live elsewhere,
 * so every transition is unit-testable. The client never invents game state —
 * it only reflects what the server said.
 */

import type {
  MapPayload,
  ScenarioRow,
  ServerMessage,
  SnapshotMessage,
} from "./protocol.js";

export type Phase = "connecting" | "menu" | "running" | "game_over";

export interface ClientState {
  phase: Phase;
  scenarios: ScenarioRow[];
  map: MapPayload | null;
  config: Record<string, unknown> | null;
  sessionId: string | null;
  latest: SnapshotMessage | null;
  finalScore: number | null;
  endReason: string | null;
  /** last inline server error (wrong phase, bad seed, ...); cleared on progress */
  error: string | null;
}

export function initialState(): ClientState {
  return {
    phase: "connecting",
    scenarios: [],
    map: null,
    config: null,
    sessionId: null,
    latest: null,
    finalScore: null,
    endReason: null,
    error: null,
  };
}

export function applyServer(state: ClientState, msg: ServerMessage): ClientState {
  switch (msg.type) {
    case "welcome":
      // greeting or post-restart: either way we are at the menu with a
      // fresh catalog and no live session
      return {
        ...initialState(),
        phase: "menu",
        scenarios: msg.scenarios,
      };
    case "started":
      return {
        ...state,
        phase: "running",
        map: msg.map,
        config: msg.config,
        sessionId: msg.session_id,
        latest: null,
        finalScore: null,
        endReason: null,
        error: null,
      };
    case "snapshot":
      if (state.phase !== "running") {
        return state; // stale frame racing a phase change
      }
      return { ...state, latest: msg };
    case "ended":
      return {
        ...state,
        phase: "game_over",
        finalScore: msg.final_score,
        endReason: msg.reason,
      };
    case "error":
      return { ...state, error: `${msg.message} (${msg.code})` };
  }
}

/** Connection dropped: back to square one, keep nothing stale. */
export function onDisconnect(_state: ClientState): ClientState {
  return initialState();
}
