/**
 * Like/dislike button semantics: one feedback per recommendation instance,
 * a short debounce against double clicks, and a single retry on transport
 * failure before surfacing the error.
 */

import { ApiClient, FeedbackResult, Status } from "./api.js";

export interface FeedbackOutcome {
  ok: boolean;
  message: string;
  result?: FeedbackResult;
}

export const CLICK_DEBOUNCE_MS = 1000;

export class FeedbackController {
  private sentFor = new Set<number>();
  private lastClickAt = 0;

  constructor(
    private client: ApiClient,
    private now: () => number = () => Date.now(),
  ) {}

  /** True when the button should be clickable for this status. */
  canSend(status: Status | null): boolean {
    return status?.recommendation != null && !this.sentFor.has(status.recommendation.id);
  }

  async send(action: "like" | "dislike", status: Status | null): Promise<FeedbackOutcome> {
    const rec = status?.recommendation;
    if (!rec) {
      return { ok: false, message: "no recommendation is active" };
    }
    const t = this.now();
    if (t - this.lastClickAt < CLICK_DEBOUNCE_MS) {
      return { ok: false, message: "ignored (double click)" };
    }
    this.lastClickAt = t;
    if (this.sentFor.has(rec.id)) {
      return { ok: false, message: "feedback already recorded for this recommendation" };
    }
    let result: FeedbackResult;
    try {
      result = await this.client.postFeedback(action, rec.id);
    } catch {
      try {
        result = await this.client.postFeedback(action, rec.id); // one retry
      } catch (err) {
        return { ok: false, message: `feedback failed: ${String(err)}` };
      }
    }
    if (!result.accepted) {
      return { ok: false, message: result.reason ?? "rejected", result };
    }
    this.sentFor.add(rec.id);
    return { ok: true, message: `feedback recorded (${action})`, result };
  }
}
