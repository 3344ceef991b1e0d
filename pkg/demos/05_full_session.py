"""A one-hour monitored session end to end, with the rendered report.

Builds a scenario with a posture problem, a mini-break, and a yawn burst,
runs the whole pipeline, and writes report.json/report.csv into ./out.
"""

import time

from ergowatch.config import PipelineConfig
from ergowatch.pipeline import ModelBundle, Pipeline
from ergowatch.pose import PoseClass
from ergowatch.stream import (
    PoseSegment,
    StreamScript,
    canonical_rigid_template,
    default_intrinsics,
    simulate_stream,
)
from ergowatch.training import train_gate_model, train_mouth_model, train_pose_model

template = canonical_rigid_template()
cfg = PipelineConfig(blink_rf=10.0, jitter_learn_seconds=5.0)

print("training models from scripted streams...")
models = ModelBundle(
    gate=train_gate_model(cfg, template, seed=0)[0],
    pose=train_pose_model(cfg, template, seed=0)[0],
    mouth=train_mouth_model(cfg, template, seed=0)[0],
)

script = StreamScript(
    duration=3600.0,
    fps=2.0,
    pose_segments=[
        PoseSegment(0, 1500, PoseClass.TOO_CLOSE, translation=(0, 0, 380)),
        PoseSegment(1500, 2400, PoseClass.CORRECT),
        PoseSegment(2400, 3600, PoseClass.ASKEW_LEFT, rotation=(0, 0, -0.4)),
    ],
    absences=[(1800.0, 2100.0)],
    yawns=[(2500.0 + 120 * k, 2502.5 + 120 * k) for k in range(4)],
    blinks=[float(t) for t in range(40, 3580, 45) if not 1780 < t < 2120],
    sigma=0.4,
)
frames, truth = simulate_stream(script, template, default_intrinsics(), seed=3)

pipe = Pipeline(cfg, models, template=template)
t0 = time.perf_counter()
pipe.run(frames)
print(f"replayed 1 h ({int(script.duration * script.fps)} frames) "
      f"in {time.perf_counter() - t0:.1f} s")

for p in pipe.session.periods:
    pose = max(p.pose_proportion, key=p.pose_proportion.get) if p.pose_proportion else "-"
    print(f"  [{p.start/60.0:5.1f}-{p.end/60.0:5.1f} min] blinks {p.blink_count:3d} "
          f"yawns {p.yawn_count} dominant {pose} present {p.present_fraction:.2f} "
          f"-> {p.status}")
for a in pipe.session.alarms:
    print(f"  alarm at {a.t/60.0:.1f} min: {a.kind}")

paths = pipe.write_report("out")
print(f"report written: {paths['json']}, {paths['csv']}")
