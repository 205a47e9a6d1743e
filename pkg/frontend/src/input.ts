/** Keyboard state -> InputCommand stream.
 *
 * WASD/arrows move (world axes: +y is north/up on screen), Shift runs.
 * One input message per client tick from whatever is currently pressed,
 * including (0,0) heartbeats, with a strictly increasing seq.
 */

import type { InputMessage } from "./protocol.js";

/** Client input sample rate; comfortably above the 20 Hz the server expects. */
export const INPUT_HZ = 30;

const UP = new Set(["KeyW", "ArrowUp"]);
const DOWN = new Set(["KeyS", "ArrowDown"]);
const LEFT = new Set(["KeyA", "ArrowLeft"]);
const RIGHT = new Set(["KeyD", "ArrowRight"]);
const RUN = new Set(["ShiftLeft", "ShiftRight"]);

export const BOUND_CODES: ReadonlySet<string> = new Set([
  ...UP, ...DOWN, ...LEFT, ...RIGHT, ...RUN,
]);

export interface Command {
  move_x: number;
  move_y: number;
  run: boolean;
}

function axis(pressed: ReadonlySet<string>, plus: Set<string>, minus: Set<string>): number {
  let value = 0;
  for (const code of plus) {
    if (pressed.has(code)) {
      value = 1;
      break;
    }
  }
  for (const code of minus) {
    if (pressed.has(code)) {
      value -= 1;
      break;
    }
  }
  return value;
}

/** Derive the command for the currently pressed keys; diagonals normalized. */
export function commandFromKeys(pressed: ReadonlySet<string>): Command {
  let x = axis(pressed, RIGHT, LEFT);
  let y = axis(pressed, UP, DOWN);
  if (x !== 0 && y !== 0) {
    const n = Math.hypot(x, y);
    x /= n;
    y /= n;
  }
  let run = false;
  for (const code of RUN) {
    if (pressed.has(code)) {
      run = true;
      break;
    }
  }
  return { move_x: x, move_y: y, run };
}

/** Tracks pressed keys and hands out sequenced input messages. */
export class InputSource {
  private pressed = new Set<string>();
  private seq = 0;

  keyDown(code: string): boolean {
    if (!BOUND_CODES.has(code)) {
      return false;
    }
    this.pressed.add(code);
    return true;
  }

  keyUp(code: string): void {
    this.pressed.delete(code);
  }

  /** Window lost focus: keys may be released without events. */
  releaseAll(): void {
    this.pressed.clear();
  }

  nextMessage(): InputMessage {
    const cmd = commandFromKeys(this.pressed);
    this.seq += 1;
    return { type: "input", seq: this.seq, ...cmd };
  }
}
