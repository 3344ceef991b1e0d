"""Learn per-landmark jitter statistics and suppress the noise.

Simulates a noisy keep-still period plus two fast head sweeps, fits the
offset Gaussians, and compares raw vs filtered landmark error against the
noise-free ground truth.
"""

import numpy as np

from ergowatch.pose import PoseClass
from ergowatch.stream import (
    PoseSegment,
    StreamScript,
    canonical_rigid_template,
    default_intrinsics,
    simulate,
)
from ergowatch.trackfix import TrackState, filter_frame, learn_jitter, still_anchor

template = canonical_rigid_template()
intrinsics = default_intrinsics()

sweeps = [
    PoseSegment(6.0, 6.8, PoseClass.CORRECT, translation=(0, 0, 600), translation_end=(120, 80, 600)),
    PoseSegment(14.0, 14.8, PoseClass.CORRECT, translation=(120, 80, 600), translation_end=(0, 0, 600)),
]
noisy, _ = simulate(StreamScript(duration=20, fps=30, sigma=1.0, pose_segments=sweeps),
                    template, intrinsics, seed=1)
clean, _ = simulate(StreamScript(duration=20, fps=30, sigma=0.0, pose_segments=sweeps),
                    template, intrinsics, seed=1)

# half a second of keep-still calibration
learn = noisy[:30]
model = learn_jitter(learn, alpha=0.05)
print(f"learned offsets: mean {model.mu.mean():.2f} px, sd {np.sqrt(model.var).mean():.2f} px")
print(f"decision band: [{model.x1:.3f}, {model.x2:.3f}] standardized, "
      f"in-band mass {model.in_band_mass:.4f}")

state = TrackState(jitter=model, previous=still_anchor(learn))
err_raw = err_filt = 0.0
for fn, fc in zip(noisy[30:], clean[30:]):
    out = filter_frame(state, fn)
    err_raw += ((fn.points - fc.points) ** 2).sum()
    err_filt += ((out.points - fc.points) ** 2).sum()

print(f"raw RMS error      {np.sqrt(err_raw / (len(noisy) - 30) / 76):.3f} px")
print(f"filtered RMS error {np.sqrt(err_filt / (len(noisy) - 30) / 76):.3f} px")
