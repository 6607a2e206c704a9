/**
 * Typed client for the session-engine HTTP API. Every UI phase change goes
 * through these calls and waits for the server response; nothing here is
 * optimistic or cached.
 */

import type { FaceLayout } from "./face.js";

export interface SessionInfo {
  id: string;
  phase: string;
  purity: number;
}

export interface TurnDoc {
  index: number;
  emotion: number | null;
  bmu: [number, number];
  action: string;
  predicted: number[];
}

export interface RecordDoc extends TurnDoc {
  reward: number;
  distance: number | null;
  cost: number;
  timestamp: number;
}

export interface StateDoc {
  phase: string;
  purity: number | null;
  interactions: number;
  discarded: number;
  epochs_completed: number;
  interactions_per_epoch: number;
  pending: TurnDoc | null;
  last_record: RecordDoc | null;
}

export interface EpochDoc {
  epoch: number;
  avg_cost: number;
  accuracy: number;
}

export interface MetricsDoc {
  purity: number | null;
  epochs: EpochDoc[];
  interactions: number;
  discarded: number;
}

export interface CatalogEntry {
  action_id: number;
  emotion: string;
  encoding: string;
  layout: FaceLayout;
  thumbnail: string;
}

export interface RenderDoc {
  encoding: string;
  action_id: number | null;
  layout: FaceLayout;
}

export type RewardBody =
  | { mode: "mimic"; emotion: number }
  | { mode: "mimic"; image: string }
  | { mode: "direct"; value: number };

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail =
      typeof body === "object" && body !== null && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<T>(response);
  }

  private async get<T>(path: string): Promise<T> {
    return parseOrThrow<T>(await fetch(this.url(path)));
  }

  createSession(overrides: Record<string, unknown> = {}): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", overrides);
  }

  getState(id: string): Promise<StateDoc> {
    return this.get<StateDoc>(`/sessions/${id}/state`);
  }

  present(id: string, body: { emotion: number } | { image: string }): Promise<TurnDoc> {
    return this.post<TurnDoc>(`/sessions/${id}/present`, body);
  }

  reward(id: string, body: RewardBody): Promise<RecordDoc> {
    return this.post<RecordDoc>(`/sessions/${id}/reward`, body);
  }

  metrics(id: string): Promise<MetricsDoc> {
    return this.get<MetricsDoc>(`/sessions/${id}/metrics`);
  }

  catalog(): Promise<{ actions: CatalogEntry[] }> {
    return this.get<{ actions: CatalogEntry[] }>("/catalog");
  }

  render(encoding: string): Promise<RenderDoc> {
    return this.get<RenderDoc>(`/render/${encoding}`);
  }
}
