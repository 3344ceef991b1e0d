/**
 * Typed client for the monitoring service's JSON endpoints.
 *
 * The dashboard performs no inference of its own: every number it shows
 * comes verbatim from one of these payloads.
 */

export interface Recommendation {
  id: number;
  action: string;
  confidence: number;
  rule: string;
  since: number;
}

export interface Status {
  schema_version: number;
  t: number | null;
  frame: number;
  pose_class: string;
  present: boolean;
  blink_rate_60s: number;
  yawn_count_period: number;
  mouth: number;
  recommendation: Recommendation | null;
  weights_b: number[];
  events_seen: number;
}

export interface Period {
  start: number;
  end: number;
  blinks: number;
  yawns: number;
  pose: Record<string, number>;
  present: number;
  status: string;
}

export interface Report {
  format_version: number;
  period_seconds: number;
  periods: Period[];
  alarms: { t: number; kind: string; message: string }[];
  totals: { blinks: number; yawns: number };
  weights_b?: number[];
}

export interface FeedbackResult {
  accepted: boolean;
  reason?: string;
  rec_id?: number;
  weights?: number[];
  deduplicated?: boolean;
}

export interface EventRecord {
  type: string;
  t: number;
  [key: string]: unknown;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path);
    if (!res.ok) {
      throw new Error(`GET ${path} failed: ${res.status}`);
    }
    return (await res.json()) as T;
  }

  async getStatus(): Promise<Status> {
    const payload = await this.getJson<{ status: Status }>("/status");
    return payload.status;
  }

  async getReport(): Promise<Report> {
    const payload = await this.getJson<{ report: Report }>("/report");
    return payload.report;
  }

  async getEvents(cursor: number): Promise<{ events: EventRecord[]; next_cursor: number }> {
    return this.getJson(`/events?cursor=${cursor}`);
  }

  /** POST one like/dislike; a 409 is a semantic rejection, not a transport error. */
  async postFeedback(action: "like" | "dislike", recommendationId: number): Promise<FeedbackResult> {
    const res = await this.fetchFn(this.baseUrl + "/feedback", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ action, recommendation_id: recommendationId }),
    });
    if (!res.ok && res.status !== 409) {
      throw new Error(`POST /feedback failed: ${res.status}`);
    }
    const payload = (await res.json()) as { feedback: FeedbackResult };
    return payload.feedback;
  }
}
