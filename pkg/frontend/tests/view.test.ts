import { describe, expect, it } from "vitest";

import { Status } from "../src/api.js";
import { renderModel } from "../src/view.js";

const base: Status = {
  schema_version: 1,
  t: 42.5,
  frame: 425,
  pose_class: "C3",
  present: true,
  blink_rate_60s: 14,
  yawn_count_period: 2,
  mouth: 1.0,
  recommendation: null,
  weights_b: [0.5, -0.5],
  events_seen: 9,
};

describe("renderModel", () => {
  it("renders service values verbatim", () => {
    const vm = renderModel({ status: base, stale: false, lastSuccessAt: 1, lastError: null }, true);
    expect(vm.poseText).toBe("C3 — too close to screen");
    expect(vm.blinkRateText).toBe("14/min");
    expect(vm.yawnText).toBe("2 this period");
    expect(vm.weightsText).toBe("0.500, -0.500");
    expect(vm.recommendationText).toBe("none");
    expect(vm.buttonsEnabled).toBe(false);
    expect(vm.staleBadge).toBe(false);
  });

  it("enables buttons only while a recommendation is active and unsent", () => {
    const withRec: Status = {
      ...base,
      recommendation: { id: 2, action: "take-break", confidence: 1.0, rule: "long-work", since: 40 },
    };
    const view = { status: withRec, stale: false, lastSuccessAt: 1, lastError: null };
    expect(renderModel(view, true).buttonsEnabled).toBe(true);
    expect(renderModel(view, false).buttonsEnabled).toBe(false);
    expect(renderModel(view, true).recommendationText).toContain("take-break");
    expect(renderModel(view, true).confidenceText).toBe("confidence 1.00");
  });

  it("shows the stale badge while retaining the last view", () => {
    const vm = renderModel({ status: base, stale: true, lastSuccessAt: 1, lastError: "x" }, false);
    expect(vm.staleBadge).toBe(true);
    expect(vm.poseText).toContain("C3");
  });

  it("handles the pre-first-response state", () => {
    const vm = renderModel({ status: null, stale: false, lastSuccessAt: null, lastError: null }, false);
    expect(vm.poseText).toMatch(/waiting/);
    expect(vm.buttonsEnabled).toBe(false);
  });
});
