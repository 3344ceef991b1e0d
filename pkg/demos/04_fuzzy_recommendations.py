"""The fuzzy recommendation engine and its feedback adaptation.

Sweeps continuous-work minutes through the default rules, then shows how
repeated dislikes on break recommendations pull the weight vector (and the
defuzzified output) toward the user's preference.
"""

import numpy as np

from ergowatch.recommend import (
    BAD_POSE_FRACTION,
    BAD_POSE_MINUTES,
    BLINK_RATE,
    DISLIKE,
    WORK_MINUTES,
    YAWNS_PER_PERIOD,
    AdaptiveRules,
    activations,
    decide,
    default_rules,
    eval_premises,
    infer,
)

rules = default_rules()
print(f"{len(rules.rules)} rules, initial weights b = {rules.b}")

def snapshot(work_min, yawns=0.0, bad_min=0.0, bad_frac=0.0):
    return {WORK_MINUTES: work_min, YAWNS_PER_PERIOD: yawns,
            BAD_POSE_MINUTES: bad_min, BAD_POSE_FRACTION: bad_frac, BLINK_RATE: 15.0}

print("\nwork-minutes sweep:")
for m in (5, 20, 25, 30, 35, 40, 50):
    theta = eval_premises(rules, snapshot(m))
    f = infer(rules, theta)
    if f is None:
        print(f"  {m:3d} min: no rule active")
        continue
    rec = decide(rules, f, activations(theta)[1])
    label = rec.action if rec else "silent (keep working)"
    print(f"  {m:3d} min: f = {f:+.3f} -> {label}")

print("\nuser dislikes every break recommendation at 38 worked minutes:")
engine = AdaptiveRules(default_rules(), batch=2)
context_minutes = 38.0
for step in range(10):
    theta = eval_premises(engine.ruleset, snapshot(context_minutes))
    f = infer(engine.ruleset, theta)
    engine.feedback(DISLIKE, theta, t=float(step))
    if step % 2 == 1:  # an adaptation just ran
        f_new = infer(engine.ruleset, eval_premises(engine.ruleset, snapshot(context_minutes)))
        print(f"  after {step + 1} dislikes: f {f:+.3f} -> {f_new:+.3f}, "
              f"b = {np.round(engine.ruleset.b, 3)}")
