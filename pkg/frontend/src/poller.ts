/**
 * Status polling loop: one in-flight request at a time, stale detection
 * when the service stops answering, last good view retained on failure.
 */

import { ApiClient, Status } from "./api.js";

export interface StatusView {
  status: Status | null;
  stale: boolean;
  lastSuccessAt: number | null;
  lastError: string | null;
}

export type ViewListener = (view: StatusView) => void;

export const DEFAULT_POLL_INTERVAL_MS = 1000;
export const STALE_AFTER_MS = 5000;

export class StatusPoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private listeners: ViewListener[] = [];
  private view: StatusView = { status: null, stale: false, lastSuccessAt: null, lastError: null };

  constructor(
    private client: ApiClient,
    private intervalMs: number = DEFAULT_POLL_INTERVAL_MS,
    private staleAfterMs: number = STALE_AFTER_MS,
    private now: () => number = () => Date.now(),
  ) {}

  get current(): StatusView {
    return this.view;
  }

  onUpdate(listener: ViewListener): void {
    this.listeners.push(listener);
  }

  start(): void {
    if (this.timer !== null) return;
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private emit(): void {
    for (const l of this.listeners) l(this.view);
  }

  private async tick(): Promise<void> {
    if (this.inFlight) {
      return; // previous request still pending; skip, don't pile up
    }
    this.inFlight = true;
    try {
      const status = await this.client.getStatus();
      this.view = { status, stale: false, lastSuccessAt: this.now(), lastError: null };
    } catch (err) {
      const last = this.view.lastSuccessAt;
      const stale = last === null || this.now() - last > this.staleAfterMs;
      this.view = { ...this.view, stale, lastError: String(err) };
    } finally {
      this.inFlight = false;
    }
    this.emit();
  }
}
