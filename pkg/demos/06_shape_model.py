"""Linear shape model: PCA over stacked landmark vectors.

Landmark frames concatenate to 152-dim shape vectors; a handful of
components captures the pose/expression variation in a simulated session,
which is the same subspace machinery the tracking layer builds on.
"""

import numpy as np

from ergowatch.mlkit import pca_fit
from ergowatch.pose import PoseClass
from ergowatch.stream import (
    PoseSegment,
    StreamScript,
    canonical_rigid_template,
    default_intrinsics,
    simulate,
)

template = canonical_rigid_template()
script = StreamScript(
    duration=120.0,
    fps=10.0,
    pose_segments=[
        PoseSegment(0, 40, PoseClass.CORRECT, translation=(0, 0, 600),
                    translation_end=(60, 30, 520)),
        PoseSegment(40, 80, PoseClass.ASKEW_LEFT, rotation=(0, 0, -0.1),
                    rotation_end=(0, 0, -0.45)),
        PoseSegment(80, 120, PoseClass.CORRECT, translation=(0, 0, 650)),
    ],
    yawns=[(90.0, 100.0)],
    sigma=0.8,
)
frames, _ = simulate(script, template, default_intrinsics(), seed=4)

shapes = np.stack([f.points.reshape(-1) for f in frames])  # (M, 152)
print(f"shape matrix {shapes.shape}")

basis = pca_fit(shapes, k=10)
total_var = shapes.var(axis=0, ddof=0).sum()
cum = np.cumsum(basis.eigenvalues) / total_var
for k in (1, 2, 3, 5, 10):
    print(f"  top {k:2d} components capture {cum[k - 1] * 100:5.1f}% of variance")

coords = basis.project(shapes)
recon = basis.reconstruct(coords)
rms = np.sqrt(((recon - shapes) ** 2).mean())
print(f"10-component reconstruction RMS {rms:.2f} px "
      f"(stream noise sigma was {script.sigma} px)")
