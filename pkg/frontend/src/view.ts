/**
 * View-model construction (pure, unit-tested) and the thin DOM bindings.
 */

import { Report } from "./api.js";
import { StatusView } from "./poller.js";

export const POSE_LABELS: Record<string, string> = {
  C1: "away from screen",
  C2: "correct posture",
  C3: "too close to screen",
  C4: "head askew left",
  C5: "head askew right",
};

export interface ViewModel {
  poseText: string;
  poseClass: string;
  presentText: string;
  blinkRateText: string;
  yawnText: string;
  recommendationText: string;
  confidenceText: string;
  buttonsEnabled: boolean;
  staleBadge: boolean;
  weightsText: string;
  clockText: string;
}

export function renderModel(view: StatusView, canSend: boolean): ViewModel {
  const s = view.status;
  if (s === null) {
    return {
      poseText: "waiting for service…",
      poseClass: "",
      presentText: "-",
      blinkRateText: "-",
      yawnText: "-",
      recommendationText: "none",
      confidenceText: "",
      buttonsEnabled: false,
      staleBadge: view.stale,
      weightsText: "",
      clockText: "",
    };
  }
  const rec = s.recommendation;
  return {
    poseText: `${s.pose_class} — ${POSE_LABELS[s.pose_class] ?? "unknown"}`,
    poseClass: s.pose_class,
    presentText: s.present ? "present" : "away",
    blinkRateText: `${s.blink_rate_60s}/min`,
    yawnText: `${s.yawn_count_period} this period`,
    recommendationText: rec ? `${rec.action} (rule: ${rec.rule})` : "none",
    confidenceText: rec ? `confidence ${rec.confidence.toFixed(2)}` : "",
    buttonsEnabled: rec !== null && canSend,
    staleBadge: view.stale,
    weightsText: s.weights_b.map((w) => w.toFixed(3)).join(", "),
    clockText: s.t === null ? "" : `stream t = ${s.t.toFixed(1)} s`,
  };
}

const STATUS_COLORS: Record<string, string> = {
  absent: "#b0b0b0",
  normal: "#4caf50",
  "bad-pose": "#ff9800",
  "potential-fatigue": "#e53935",
};

const POSE_COLORS: Record<string, string> = {
  C1: "#9e9e9e",
  C2: "#4caf50",
  C3: "#ff7043",
  C4: "#42a5f5",
  C5: "#ab47bc",
};

export function applyViewModel(vm: ViewModel, doc: Document): void {
  const set = (id: string, text: string) => {
    const el = doc.getElementById(id);
    if (el) el.textContent = text;
  };
  set("pose", vm.poseText);
  set("present", vm.presentText);
  set("blinks", vm.blinkRateText);
  set("yawns", vm.yawnText);
  set("recommendation", vm.recommendationText);
  set("confidence", vm.confidenceText);
  set("weights", vm.weightsText);
  set("clock", vm.clockText);
  const stale = doc.getElementById("stale-badge");
  if (stale) stale.style.display = vm.staleBadge ? "inline-block" : "none";
  for (const id of ["btn-like", "btn-dislike"]) {
    const btn = doc.getElementById(id) as HTMLButtonElement | null;
    if (btn) btn.disabled = !vm.buttonsEnabled;
  }
}

/** Two Fig-style strips: stacked pose shares and blink/yawn counts per period. */
export function renderPeriodStrips(report: Report, doc: Document): void {
  const strip = doc.getElementById("period-strip");
  const counts = doc.getElementById("period-counts");
  if (!strip || !counts) return;
  strip.innerHTML = "";
  counts.innerHTML = "";
  for (const p of report.periods) {
    const col = doc.createElement("div");
    col.className = "period-col";
    col.title = `${(p.start / 60).toFixed(0)}–${(p.end / 60).toFixed(0)} min: ${p.status}`;
    for (const [cls, share] of Object.entries(p.pose)) {
      if (share <= 0) continue;
      const seg = doc.createElement("div");
      seg.style.height = `${share * 100}%`;
      seg.style.background = POSE_COLORS[cls] ?? "#ccc";
      col.appendChild(seg);
    }
    strip.appendChild(col);

    const c = doc.createElement("div");
    c.className = "period-col counts";
    c.style.borderTop = `4px solid ${STATUS_COLORS[p.status] ?? "#ccc"}`;
    c.textContent = `${p.blinks}/${p.yawns}`;
    c.title = `blinks ${p.blinks}, yawns ${p.yawns} — ${p.status}`;
    counts.appendChild(c);
  }
}
