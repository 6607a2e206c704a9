/**
 * Turn state machine. Phases advance strictly in order:
 *
 *   awaiting-stimulus -> robot-acted -> awaiting-reward -> updated
 *
 * and wrap back to awaiting-stimulus for the next turn. Every transition
 * into robot-acted or updated happens only after the server responds
 * (optimistic UI is disabled); the inFlight latch blocks double submits
 * while a request is out. Any method called in the wrong phase throws,
 * which is what keeps illegal API calls from being issued at all.
 */

import type { RecordDoc, TurnDoc } from "./api.js";

export type TurnPhase =
  | "awaiting-stimulus"
  | "robot-acted"
  | "awaiting-reward"
  | "updated";

export class IllegalPhaseError extends Error {
  constructor(op: string, phase: TurnPhase) {
    super(`${op} is illegal in phase ${phase}`);
  }
}

export class TurnMachine {
  phase: TurnPhase = "awaiting-stimulus";
  inFlight = false;
  turn: TurnDoc | null = null;
  lastRecord: RecordDoc | null = null;
  turnsCompleted = 0;

  canPresent(): boolean {
    return this.phase === "awaiting-stimulus" && !this.inFlight;
  }

  canSubmitReward(): boolean {
    return this.phase === "awaiting-reward" && !this.inFlight;
  }

  /** Claim the present call; must precede ApiClient.present. */
  beginPresent(): void {
    if (!this.canPresent()) throw new IllegalPhaseError("present", this.phase);
    this.inFlight = true;
  }

  /** Server confirmed the robot acted. */
  onPresented(turn: TurnDoc): void {
    if (this.phase !== "awaiting-stimulus" || !this.inFlight) {
      throw new IllegalPhaseError("onPresented", this.phase);
    }
    this.turn = turn;
    this.inFlight = false;
    this.phase = "robot-acted";
  }

  /** The face is on screen and the reward prompt is open. */
  promptReward(): void {
    if (this.phase !== "robot-acted" || this.inFlight) {
      throw new IllegalPhaseError("promptReward", this.phase);
    }
    this.phase = "awaiting-reward";
  }

  /** Claim the reward call; must precede ApiClient.reward. */
  beginReward(): void {
    if (!this.canSubmitReward()) throw new IllegalPhaseError("reward", this.phase);
    this.inFlight = true;
  }

  /** Server accepted the reward and updated the model. */
  onRewarded(record: RecordDoc): void {
    if (this.phase !== "awaiting-reward" || !this.inFlight) {
      throw new IllegalPhaseError("onRewarded", this.phase);
    }
    this.lastRecord = record;
    this.turn = null;
    this.inFlight = false;
    this.phase = "updated";
    this.turnsCompleted += 1;
  }

  /** A request failed: clear the latch, stay in the current phase. */
  onError(): void {
    this.inFlight = false;
  }

  /** Start the next turn. */
  nextTurn(): void {
    if (this.phase !== "updated" || this.inFlight) {
      throw new IllegalPhaseError("nextTurn", this.phase);
    }
    this.phase = "awaiting-stimulus";
  }
}
