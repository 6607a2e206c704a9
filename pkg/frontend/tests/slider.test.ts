import { describe, expect, it } from "vitest";

import { REWARD_MAX, REWARD_MIN, REWARD_STEP, rewardStops, snapReward } from "../src/slider.js";

describe("snapReward", () => {
  it("keeps values already on the grid", () => {
    for (const v of [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2]) {
      expect(snapReward(v)).toBe(v);
    }
  });

  it("rounds to the nearest half step", () => {
    expect(snapReward(0.2)).toBe(0);
    expect(snapReward(0.26)).toBe(0.5);
    expect(snapReward(-1.74)).toBe(-1.5);
    expect(snapReward(-1.76)).toBe(-2);
  });

  it("clamps to the slider range", () => {
    expect(snapReward(3.7)).toBe(REWARD_MAX);
    expect(snapReward(-9)).toBe(REWARD_MIN);
  });

  it("rejects non-finite input", () => {
    expect(() => snapReward(Number.NaN)).toThrow();
    expect(() => snapReward(Number.POSITIVE_INFINITY)).toThrow();
  });
});

describe("rewardStops", () => {
  it("enumerates the nine half-step stops from -2 to +2", () => {
    const stops = rewardStops();
    expect(stops).toEqual([-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2]);
    expect(stops[1] - stops[0]).toBe(REWARD_STEP);
  });
});
