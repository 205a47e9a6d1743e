/** Browser entry point: socket, DOM, and the render/input loops.
 *
 * All logic with interesting behavior lives in the pure modules next to this
 * file; this one only wires them to the page.
 */

import { helloMessage, startMessage } from "./protocol.js";
import type { ServerMessage } from "./protocol.js";
import { applyServer, initialState, onDisconnect } from "./state.js";
import type { ClientState } from "./state.js";
import { SnapshotBuffer } from "./interpolate.js";
import { INPUT_HZ, InputSource } from "./input.js";
import { Connection } from "./net.js";
import { renderFrame } from "./render.js";

function queryParam(name: string, fallback: string): string {
  const value = new URLSearchParams(window.location.search).get(name);
  return value === null || value === "" ? fallback : value;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d");
if (ctx === null) {
  throw new Error("canvas 2d context unavailable");
}
const menuEl = el<HTMLDivElement>("menu");
const scenarioListEl = el<HTMLDivElement>("scenario-list");
const seedEl = el<HTMLInputElement>("seed");
const statusEl = el<HTMLDivElement>("status");
const errorEl = el<HTMLDivElement>("error");
const overEl = el<HTMLDivElement>("game-over");
const overScoreEl = el<HTMLDivElement>("final-score");
const overReasonEl = el<HTMLDivElement>("end-reason");
const restartEl = el<HTMLButtonElement>("restart");

const server = queryParam("server", window.location.host);
const participant = queryParam("participant", "");
const wsUrl = `ws://${server}/ws`;

let state: ClientState = initialState();
const buffer = new SnapshotBuffer();
const input = new InputSource();

const conn = new Connection(wsUrl, {
  onOpen: () => {
    conn.send(helloMessage(participant));
  },
  onMessage: (msg: ServerMessage) => {
    if (msg.type === "snapshot") {
      buffer.push(msg, performance.now());
    }
    update(applyServer(state, msg));
  },
  onClose: () => {
    buffer.clear();
    update(onDisconnect(state));
  },
});

function update(next: ClientState): void {
  const phaseChanged = next.phase !== state.phase;
  const scenariosChanged = next.scenarios !== state.scenarios;
  const errorChanged = next.error !== state.error;
  state = next;
  if (phaseChanged && state.phase === "running") {
    buffer.clear();
  }
  if (phaseChanged || scenariosChanged || errorChanged) {
    syncDom();
  }
}

function syncDom(): void {
  menuEl.hidden = state.phase !== "menu";
  overEl.hidden = state.phase !== "game_over";
  statusEl.hidden = state.phase !== "connecting";
  errorEl.textContent = state.error ?? "";
  errorEl.hidden = state.error === null;
  if (state.phase === "menu") {
    renderMenu();
  }
  if (state.phase === "game_over") {
    overScoreEl.textContent = String(state.finalScore ?? 0);
    overReasonEl.textContent =
      state.endReason === "hit" ? "You were hit by a vehicle." : "Time is up.";
  }
}

function renderMenu(): void {
  scenarioListEl.replaceChildren();
  for (const row of state.scenarios) {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "scenario";
    button.textContent = row.indicator ? `${row.name} ●` : row.name;
    button.title = row.indicator
      ? "autonomous vehicles show a green indicator near you"
      : "no vehicle indicators";
    button.addEventListener("click", () => {
      conn.send(startMessage(row.id, seedEl.value));
    });
    scenarioListEl.append(button);
  }
}

// -- input loop ---------------------------------------------------------------

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) {
    return;
  }
  if (input.keyDown(ev.code) && state.phase === "running") {
    ev.preventDefault();
  }
});
window.addEventListener("keyup", (ev) => {
  input.keyUp(ev.code);
});
window.addEventListener("blur", () => {
  input.releaseAll();
});

setInterval(() => {
  if (state.phase === "running" && conn.ready) {
    conn.send(input.nextMessage());
  }
}, 1000 / INPUT_HZ);

restartEl.addEventListener("click", () => {
  conn.send({ type: "restart" });
});

// -- render loop --------------------------------------------------------------

function resize(): void {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = Math.floor(canvas.clientWidth * dpr);
  canvas.height = Math.floor(canvas.clientHeight * dpr);
  ctx!.setTransform(dpr, 0, 0, dpr, 0, 0);
}
window.addEventListener("resize", resize);
resize();

function frame(): void {
  const width = canvas.clientWidth;
  const height = canvas.clientHeight;
  if (state.phase === "running" || state.phase === "game_over") {
    const view = buffer.sample(performance.now());
    if (state.map !== null && view !== null) {
      renderFrame(ctx!, width, height, state.map, view);
    }
  } else {
    ctx!.clearRect(0, 0, width, height);
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);

conn.start();
