/** Traffic-light state reconstructed from the walk signals.
 *
 * Snapshots carry only per-arm walk permissions. A crosswalk arm is walkable
 * exactly while the street it crosses is held by the *other* street's green:
 * E/W arms span the east-west road and are walkable during the north-south
 * green, and vice versa. All four false means the all-red clearance phase.
 */

import type { WalkSignals } from "./protocol.js";

export interface TrafficLights {
  nsGreen: boolean;
  ewGreen: boolean;
}

export function trafficLightsFromWalk(walk: WalkSignals): TrafficLights {
  return {
    nsGreen: walk.E && walk.W,
    ewGreen: walk.N && walk.S,
  };
}
