/** Direct-reward slider model: range [-2, 2] in 0.5 steps. */

export const REWARD_MIN = -2;
export const REWARD_MAX = 2;
export const REWARD_STEP = 0.5;

/** Clamp to [-2, 2] and snap to the nearest 0.5 step. */
export function snapReward(value: number): number {
  if (!Number.isFinite(value)) {
    throw new Error(`reward must be finite, got ${value}`);
  }
  const clamped = Math.min(REWARD_MAX, Math.max(REWARD_MIN, value));
  return Math.round(clamped / REWARD_STEP) * REWARD_STEP;
}

/** All legal slider positions, ascending. */
export function rewardStops(): number[] {
  const stops: number[] = [];
  for (let v = REWARD_MIN; v <= REWARD_MAX; v += REWARD_STEP) stops.push(v);
  return stops;
}
