"""Fuzzy-logic recommendation engine with explicit-feedback adaptation.

Rules score their premises through membership ramps, rule activations are
premise products, and the defuzzified output is the activation-weighted
average of rule weights. Weights are fit by (ridge) least squares over
feedback samples and blended into the live vector at a fixed adaptation
rate, so the system drifts toward the user's expressed preferences.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from . import mlkit

RULESET_FORMAT_VERSION = 1

TAKE_BREAK = "take-break"
RAISE_ALARM = "raise-alarm"
KEEP_WORKING = "keep-working"
ADJUST_POSTURE = "adjust-posture"

CONSEQUENCES = (TAKE_BREAK, RAISE_ALARM, KEEP_WORKING, ADJUST_POSTURE)

LIKE = "like"
DISLIKE = "dislike"


class UnknownFeatureError(KeyError):
    pass


class NoActiveRuleError(ValueError):
    """Every rule activation is zero; no recommendation can be formed."""


@dataclass(frozen=True)
class MembershipFn:
    """Piecewise-linear membership in [0, 1] over one source feature."""

    feature: str
    kind: str  # "ramp-up" | "ramp-down" | "trapezoid"
    breaks: tuple

    def __post_init__(self):
        need = {"ramp-up": 2, "ramp-down": 2, "trapezoid": 4}
        if self.kind not in need:
            raise ValueError(f"unknown membership kind {self.kind!r}")
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        if len(self.breaks) != need[self.kind]:
            raise ValueError(f"{self.kind} takes {need[self.kind]} breakpoints")
        if any(b < a for a, b in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breakpoints must be nondecreasing")

    def __call__(self, v: float) -> float:
        b = self.breaks
        if self.kind == "ramp-up":
            return _ramp(v, b[0], b[1])
        if self.kind == "ramp-down":
            return 1.0 - _ramp(v, b[0], b[1])
        return min(_ramp(v, b[0], b[1]), 1.0 - _ramp(v, b[2], b[3]))

    def to_dict(self) -> dict:
        return {"feature": self.feature, "kind": self.kind, "breaks": list(self.breaks)}

    @classmethod
    def from_dict(cls, d: dict) -> "MembershipFn":
        return cls(d["feature"], d["kind"], tuple(d["breaks"]))


def _ramp(v: float, a: float, b: float) -> float:
    if v <= a:
        return 0.0
    if v >= b:
        return 1.0
    return (v - a) / (b - a)


@dataclass(frozen=True)
class Rule:
    name: str
    premises: tuple  # of MembershipFn
    weight: float
    consequence: str

    def __post_init__(self):
        if len(self.premises) < 1:
            raise ValueError("a rule needs at least one premise")
        if self.consequence not in CONSEQUENCES:
            raise ValueError(f"unknown consequence {self.consequence!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "premises": [p.to_dict() for p in self.premises],
            "weight": self.weight,
            "consequence": self.consequence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Rule":
        return cls(
            d["name"],
            tuple(MembershipFn.from_dict(p) for p in d["premises"]),
            float(d["weight"]),
            d["consequence"],
        )


@dataclass(frozen=True)
class RuleSet:
    """Immutable rule snapshot; feedback produces a replacement, never an edit."""

    rules: tuple  # of Rule
    adapt_alpha: float = 0.2
    ridge: float = 1e-3
    threshold: float = 0.0

    def __post_init__(self):
        if len(self.rules) < 1:
            raise ValueError("need at least one rule")
        if not 0.0 <= self.adapt_alpha <= 1.0:
            raise ValueError("adaptation rate must lie in [0, 1]")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")

    @property
    def b(self) -> np.ndarray:
        return np.array([r.weight for r in self.rules])

    def with_weights(self, b) -> "RuleSet":
        b = np.asarray(b, dtype=float)
        if b.shape != (len(self.rules),):
            raise ValueError("weight vector length must match the rule count")
        rules = tuple(replace(r, weight=float(w)) for r, w in zip(self.rules, b))
        return replace(self, rules=rules)

    def to_dict(self) -> dict:
        return {
            "format_version": RULESET_FORMAT_VERSION,
            "rules": [r.to_dict() for r in self.rules],
            "adapt_alpha": self.adapt_alpha,
            "ridge": self.ridge,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RuleSet":
        return cls(
            tuple(Rule.from_dict(r) for r in d["rules"]),
            adapt_alpha=float(d.get("adapt_alpha", 0.2)),
            ridge=float(d.get("ridge", 1e-3)),
            threshold=float(d.get("threshold", 0.0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "RuleSet":
        with open(path) as f:
            return cls.from_dict(json.load(f))


# feature ids every snapshot must provide for the default rules
WORK_MINUTES = "work_min"
BAD_POSE_MINUTES = "bad_pose_min"
YAWNS_PER_PERIOD = "yawns_period"
BLINK_RATE = "blink_rate"
BAD_POSE_FRACTION = "bad_pose_frac"


def default_rules() -> RuleSet:
    """Expert rules with ramps spanning +/-33% around the crisp thresholds.

    Initial weights anchor the output scale: +1 for break/alarm consequences,
    -1 for keep working.
    """
    return RuleSet(
        rules=(
            Rule(
                "fresh-keep-working",
                (MembershipFn(WORK_MINUTES, "ramp-down", (20.0, 40.0)),),
                -1.0,
                KEEP_WORKING,
            ),
            Rule(
                "long-work-break",
                (MembershipFn(WORK_MINUTES, "ramp-up", (20.0, 40.0)),),
                1.0,
                TAKE_BREAK,
            ),
            Rule(
                "bad-pose-alarm",
                (MembershipFn(BAD_POSE_MINUTES, "ramp-up", (20.0 / 3.0, 40.0 / 3.0)),),
                1.0,
                RAISE_ALARM,
            ),
            Rule(
                "yawn-burst-break",
                (MembershipFn(YAWNS_PER_PERIOD, "ramp-up", (10.0 / 3.0, 20.0 / 3.0)),),
                1.0,
                TAKE_BREAK,
            ),
            Rule(
                "slouching-posture",
                (MembershipFn(BAD_POSE_FRACTION, "ramp-up", (1.0 / 3.0, 2.0 / 3.0)),),
                1.0,
                ADJUST_POSTURE,
            ),
        )
    )


# ---------------------------------------------------------------------------
# inference


def eval_premises(rules: RuleSet, features) -> list[np.ndarray]:
    """Per-rule premise score rows (ragged: each rule scores its own premises)."""
    theta = []
    for rule in rules.rules:
        row = np.empty(len(rule.premises))
        for j, p in enumerate(rule.premises):
            if p.feature not in features:
                raise UnknownFeatureError(p.feature)
            row[j] = min(1.0, max(0.0, p(float(features[p.feature]))))
        theta.append(row)
    return theta


def activations(theta) -> tuple[np.ndarray, np.ndarray]:
    """(mu, xi): rule activations (premise products) and their normalization.

    Raises NoActiveRuleError when every activation is zero.
    """
    mu = np.array([float(np.prod(row)) for row in theta])
    total = mu.sum()
    if total <= 0.0:
        raise NoActiveRuleError("all rule activations are zero")
    return mu, mu / total


def infer(rules: RuleSet, theta) -> float | None:
    """Activation-weighted average of rule weights; None when no rule fires."""
    try:
        mu, _ = activations(theta)
    except NoActiveRuleError:
        return None
    return float((rules.b @ mu) / mu.sum())


@dataclass(frozen=True)
class Recommendation:
    action: str
    confidence: float  # the defuzzified output
    rule_index: int
    rule_name: str


def decide(rules: RuleSet, f: float, xi) -> Recommendation | None:
    """Emit the dominant rule's consequence when f clears the threshold.

    Below threshold means keep working silently (no recommendation).
    """
    if not math.isfinite(f):
        raise ValueError("defuzzified output must be finite")
    if f < rules.threshold:
        return None
    i = int(np.argmax(xi))
    rule = rules.rules[i]
    return Recommendation(rule.consequence, f, i, rule.name)


# ---------------------------------------------------------------------------
# learning and adaptation


@dataclass(frozen=True)
class FeedbackSample:
    """One explicit user verdict: premise scores at decision time plus a target."""

    theta: tuple  # ragged rows, one per rule
    y: float  # +1 take a break, -1 keep working
    t: float
    source: str = "explicit"

    def __post_init__(self):
        if self.y not in (-1.0, 1.0, -1, 1):
            raise ValueError("target must be -1 or +1")
        object.__setattr__(
            self, "theta", tuple(tuple(float(v) for v in row) for row in self.theta)
        )

    def to_dict(self) -> dict:
        return {
            "theta": [list(row) for row in self.theta],
            "y": float(self.y),
            "t": self.t,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackSample":
        return cls(tuple(tuple(r) for r in d["theta"]), float(d["y"]), float(d["t"]), d.get("source", "explicit"))


def train_b(samples, ridge: float = 0.0) -> np.ndarray:
    """Least-squares weights from feedback samples.

    Each sample contributes one row of normalized activations; with no ridge
    at least as many samples as rules are required.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no feedback samples")
    n_rules = len(samples[0].theta)
    if ridge == 0.0 and len(samples) < n_rules:
        raise ValueError(
            f"need at least {n_rules} samples for an unregularized fit, got {len(samples)}"
        )
    Xi = np.stack([activations(s.theta)[1] for s in samples])
    y = np.array([s.y for s in samples])
    return mlkit.least_squares(Xi, y, ridge=ridge)


def adapt(b_prev, b_star, alpha: float) -> np.ndarray:
    """Blend toward the refit weights: (1 - alpha)·b_prev + alpha·b_star."""
    b_prev = np.asarray(b_prev, dtype=float)
    b_star = np.asarray(b_star, dtype=float)
    if b_prev.shape != b_star.shape:
        raise ValueError("weight vectors must have equal dimension")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("adaptation rate must lie in [0, 1]")
    if alpha == 0.0:
        return b_prev.copy()
    if alpha == 1.0:
        return b_star.copy()
    return (1.0 - alpha) * b_prev + alpha * b_star


class AdaptiveRules:
    """Owns the live RuleSet snapshot plus the feedback buffer.

    Samples accumulate in a sliding window; every `batch` new samples the
    window is refit and the live weights are blended toward the fit.
    Snapshots are immutable, so readers can hold one across an update.
    """

    def __init__(self, ruleset: RuleSet, batch: int | None = None, window: int = 50):
        self.ruleset = ruleset
        self.batch = batch if batch is not None else len(ruleset.rules)
        self.window: deque = deque(maxlen=window)
        self._pending = 0
        self.adaptations = 0

    def feedback(self, event: str, theta, t: float) -> RuleSet:
        """Record one like/dislike in the given premise context; maybe refit."""
        if event not in (LIKE, DISLIKE):
            raise ValueError(f"unknown feedback event {event!r}")
        y = 1.0 if event == LIKE else -1.0
        self.window.append(FeedbackSample(tuple(tuple(r) for r in theta), y, t))
        self._pending += 1
        if self._pending >= self.batch:
            b_star = train_b(self.window, ridge=self.ruleset.ridge)
            b_new = adapt(self.ruleset.b, b_star, self.ruleset.adapt_alpha)
            self.ruleset = self.ruleset.with_weights(b_new)
            self._pending = 0
            self.adaptations += 1
        return self.ruleset
