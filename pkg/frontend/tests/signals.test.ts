import { describe, expect, it } from "vitest";

import { trafficLightsFromWalk } from "../src/signals.js";

describe("trafficLightsFromWalk", () => {
  it("east-west walk arms mean the north-south road has green", () => {
    const lights = trafficLightsFromWalk({ N: false, S: false, E: true, W: true });
    expect(lights).toEqual({ nsGreen: true, ewGreen: false });
  });

  it("north-south walk arms mean the east-west road has green", () => {
    const lights = trafficLightsFromWalk({ N: true, S: true, E: false, W: false });
    expect(lights).toEqual({ nsGreen: false, ewGreen: true });
  });

  it("all-red clearance shows red both ways", () => {
    const lights = trafficLightsFromWalk({ N: false, S: false, E: false, W: false });
    expect(lights).toEqual({ nsGreen: false, ewGreen: false });
  });

  it("a lone walkable arm never implies a green", () => {
    expect(trafficLightsFromWalk({ N: true, S: false, E: false, W: false }).ewGreen).toBe(false);
    expect(trafficLightsFromWalk({ N: false, S: false, E: true, W: false }).nsGreen).toBe(false);
  });
});
