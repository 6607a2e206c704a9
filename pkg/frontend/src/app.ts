/**
 * DOM wiring for the trainer. All engine state lives server-side; this file
 * renders it and forwards user intent through the TurnMachine guards.
 */

import { ApiClient, ApiError, type CatalogEntry, type TurnDoc } from "./api.js";
import { chartPoints, chartSvg } from "./chart.js";
import { decodeToLayout, faceSvg } from "./face.js";
import { rewardStops, snapReward } from "./slider.js";
import { TurnMachine } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const EMOTIONS = [
  "anger",
  "disgust",
  "fear",
  "happiness",
  "sadness",
  "surprise",
  "neutral",
];

class TrainerApp {
  private api: ApiClient;
  private machine = new TurnMachine();
  private sessionId: string | null = null;
  private catalog: CatalogEntry[] = [];

  constructor(baseUrl: string) {
    this.api = new ApiClient(baseUrl);
  }

  async start(): Promise<void> {
    this.catalog = (await this.api.catalog()).actions;
    this.renderMimicChoices();
    this.renderStimulusButtons();
    this.renderSlider();
    el<HTMLButtonElement>("create-session").addEventListener("click", () => {
      void this.createSession();
    });
    el<HTMLButtonElement>("next-turn").addEventListener("click", () => {
      this.machine.nextTurn();
      this.refreshControls();
      this.setStatus("pick the next stimulus");
    });
    this.refreshControls();
  }

  private setStatus(text: string): void {
    el("status").textContent = text;
  }

  private showError(err: unknown): void {
    const text = err instanceof ApiError ? err.message : String(err);
    el("error").textContent = text;
  }

  private clearError(): void {
    el("error").textContent = "";
  }

  private async createSession(): Promise<void> {
    this.clearError();
    try {
      const info = await this.api.createSession({});
      this.sessionId = info.id;
      this.machine = new TurnMachine();
      el("session-label").textContent =
        `session ${info.id} (purity ${info.purity.toFixed(2)})`;
      this.setStatus("pick a stimulus to present");
      await this.refreshMetrics();
    } catch (err) {
      this.showError(err);
    }
    this.refreshControls();
  }

  private renderStimulusButtons(): void {
    const host = el("stimuli");
    EMOTIONS.forEach((name, emotion) => {
      const button = document.createElement("button");
      button.textContent = name;
      button.className = "stimulus";
      button.addEventListener("click", () => void this.present(emotion));
      host.appendChild(button);
    });
  }

  private async present(emotion: number): Promise<void> {
    if (!this.sessionId || !this.machine.canPresent()) return;
    this.clearError();
    this.machine.beginPresent();
    this.refreshControls();
    try {
      const turn = await this.api.present(this.sessionId, { emotion });
      this.machine.onPresented(turn);
      this.showFace(turn);
      this.machine.promptReward();
      this.setStatus(
        `robot answered ${turn.action}; reward it by mimic or slider`);
    } catch (err) {
      this.machine.onError();
      this.showError(err);
    }
    this.refreshControls();
  }

  private showFace(turn: TurnDoc): void {
    try {
      el("face").innerHTML = faceSvg(decodeToLayout(turn.action));
    } catch (err) {
      // Leave the previous face untouched on a bad encoding.
      this.showError(err);
    }
  }

  private renderMimicChoices(): void {
    const host = el("mimic-choices");
    for (const entry of this.catalog) {
      const button = document.createElement("button");
      button.className = "mimic";
      const img = document.createElement("img");
      img.alt = entry.emotion;
      img.width = 64;
      img.height = 64;
      img.src = `data:image/x-portable-graymap;base64,${entry.thumbnail}`;
      button.appendChild(img);
      button.appendChild(document.createTextNode(entry.emotion));
      button.addEventListener("click", () => {
        void this.reward({ mode: "mimic", emotion: entry.action_id });
      });
      host.appendChild(button);
    }
  }

  private renderSlider(): void {
    const slider = el<HTMLInputElement>("reward-slider");
    slider.min = String(rewardStops()[0]);
    slider.max = String(rewardStops()[rewardStops().length - 1]);
    slider.step = "0.5";
    slider.value = "0";
    slider.addEventListener("input", () => {
      el("slider-value").textContent = snapReward(Number(slider.value)).toFixed(1);
    });
    el<HTMLButtonElement>("submit-direct").addEventListener("click", () => {
      void this.reward({
        mode: "direct",
        value: snapReward(Number(slider.value)),
      });
    });
  }

  private async reward(
    body: { mode: "mimic"; emotion: number } | { mode: "direct"; value: number },
  ): Promise<void> {
    if (!this.sessionId || !this.machine.canSubmitReward()) return;
    this.clearError();
    this.machine.beginReward();
    this.refreshControls();
    try {
      const record = await this.api.reward(this.sessionId, body);
      this.machine.onRewarded(record);
      this.setStatus(
        `reward ${record.reward.toFixed(1)} recorded (cost ${record.cost.toFixed(3)})`);
      await this.refreshMetrics();
    } catch (err) {
      this.machine.onError();
      this.showError(err);
    }
    this.refreshControls();
  }

  private async refreshMetrics(): Promise<void> {
    if (!this.sessionId) return;
    const metrics = await this.api.metrics(this.sessionId);
    el("chart").innerHTML = chartSvg(chartPoints(metrics.epochs, "avg_cost"));
    el("metrics-label").textContent =
      `${metrics.interactions} interactions, ` +
      `${metrics.epochs.length} epochs completed`;
  }

  private refreshControls(): void {
    const canPresent = this.sessionId !== null && this.machine.canPresent();
    const canReward = this.sessionId !== null && this.machine.canSubmitReward();
    document
      .querySelectorAll<HTMLButtonElement>("button.stimulus")
      .forEach((b) => (b.disabled = !canPresent));
    document
      .querySelectorAll<HTMLButtonElement>("button.mimic")
      .forEach((b) => (b.disabled = !canReward));
    el<HTMLButtonElement>("submit-direct").disabled = !canReward;
    el<HTMLInputElement>("reward-slider").disabled = !canReward;
    el<HTMLButtonElement>("next-turn").disabled =
      this.machine.phase !== "updated" || this.machine.inFlight;
    el("phase-label").textContent = this.machine.phase;
  }
}

const base = new URLSearchParams(window.location.search).get("api") ?? "";
void new TrainerApp(base).start();
