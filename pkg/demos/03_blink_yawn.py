"""Blink and yawn detection on a scripted stream.

The blink detector normalizes eye-patch color against its own running
statistics; the yawn detector times mouth-open runs from a linear mouth
classifier. Both run here against simulator ground truth.
"""

from ergowatch.config import PipelineConfig
from ergowatch.features import (
    BlinkDetectorState,
    BlinkTracker,
    YawnDetectorState,
    classify_mouth,
    detect_yawn,
)
from ergowatch.stream import StreamScript, canonical_rigid_template, default_intrinsics, simulate
from ergowatch.training import train_mouth_model

template = canonical_rigid_template()
K = default_intrinsics()
cfg = PipelineConfig()

script = StreamScript(
    duration=60.0,
    fps=30.0,
    blinks=[5.0, 12.0, 19.0, 33.0, 47.0],
    yawns=[(24.0, 26.5), (40.0, 41.0), (52.0, 55.0)],  # middle one is sub-threshold
)
frames, truth = simulate(script, template, K, seed=2)
print(f"scripted: {len(truth.blinks)} blinks, {len(truth.yawns)} mouth-open spans "
      f"(one shorter than the {cfg.yawn_tt} s yawn threshold)")

mouth_model, acc = train_mouth_model(cfg, template, seed=0)
print(f"mouth classifier training accuracy {acc:.3f}")

blinks = BlinkTracker(
    left=BlinkDetectorState(rf=script.fps, ct=cfg.blink_ct),
    right=BlinkDetectorState(rf=script.fps, ct=cfg.blink_ct),
)
yawner = YawnDetectorState(tt=cfg.yawn_tt)

for i, f in enumerate(frames):
    ev = blinks.update(f, i)
    if ev:
        print(f"  t={ev.t:6.2f}s blink ({ev.eye})")
    state = classify_mouth(mouth_model, f)
    yv = detect_yawn(yawner, state, f.t)
    if yv:
        print(f"  t={yv.t:6.2f}s yawn (open since {yv.start:.2f}s)")
