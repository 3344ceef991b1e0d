"""Builds labeled datasets from scripted streams and trains the three models.

The simulator knows which frames are lost, which pose class each segment
belongs to, and when the mouth is open, so every classifier trains against
exact labels without any recorded video.
"""

from __future__ import annotations

import math

import numpy as np

from . import features, mlkit, trackfix
from .config import PipelineConfig
from .pose import (
    POSE_LABELS,
    NoConvergenceError,
    PoseClass,
    RigidTemplate,
    pose_features,
    rvec_from_euler,
    solve_pnp,
)
from .stream import DEFAULT_DISTANCE, PoseSegment, StreamScript, simulate

# scripted parameter ranges per pose class: (yaw, pitch, roll) degrees + tz.
# away-gaze trains one-sided: a linear one-vs-rest split cannot express
# |yaw|, and the pipeline produces C1 from the loss gate / absence path
# anyway — the classifier only needs the scripted away side
_CLASS_RANGES = {
    PoseClass.AWAY: ((40.0, 65.0), (-10.0, 10.0), (-8.0, 8.0), (520.0, 700.0)),
    PoseClass.CORRECT: ((-10.0, 10.0), (-8.0, 8.0), (-8.0, 8.0), (520.0, 700.0)),
    PoseClass.TOO_CLOSE: ((-10.0, 10.0), (-8.0, 8.0), (-8.0, 8.0), (300.0, 420.0)),
    PoseClass.ASKEW_LEFT: ((-8.0, 8.0), (-8.0, 8.0), (-38.0, -16.0), (520.0, 700.0)),
    PoseClass.ASKEW_RIGHT: ((-8.0, 8.0), (-8.0, 8.0), (16.0, 38.0), (520.0, 700.0)),
}


def sample_class_pose(label: PoseClass, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random (rotation, translation) well inside one pose class."""
    (ylo, yhi), (plo, phi), (rlo, rhi), (zlo, zhi) = _CLASS_RANGES[label]
    yaw = math.radians(rng.uniform(ylo, yhi))
    rvec = rvec_from_euler(yaw, math.radians(rng.uniform(plo, phi)), math.radians(rng.uniform(rlo, rhi)))
    tz = rng.uniform(zlo, zhi)
    t = np.array([rng.uniform(-40, 40), rng.uniform(-30, 30), tz])
    return rvec, t


def pose_training_data(
    template: RigidTemplate,
    intrinsics,
    per_class: int = 300,
    noise: float = 0.4,
    seed: int = 0,
):
    """(features, label) pairs from solved noisy projections of scripted poses."""
    rng = np.random.default_rng(seed)
    samples = []
    span = template.span
    for label in PoseClass:
        made = 0
        while made < per_class:
            rvec, t = sample_class_pose(label, rng)
            from .pose import Pose, project  # local import keeps module load light

            pts = project(template.points, Pose(rvec, t), intrinsics)
            pts = pts + rng.normal(0.0, noise, pts.shape)
            try:
                est = solve_pnp(pts, template, intrinsics)
            except NoConvergenceError:
                continue
            samples.append((pose_features(est, span), label.value))
            made += 1
    return samples


def train_pose_model(cfg: PipelineConfig, template: RigidTemplate, seed: int = 0):
    samples = pose_training_data(template, cfg.intrinsics, seed=seed)
    model = mlkit.train_one_vs_rest(samples, POSE_LABELS, lam=1e-3, epochs=30, seed=seed)
    acc = _accuracy(samples, lambda x: mlkit.predict_class(model, x))
    return model, acc


def gate_training_data(cfg: PipelineConfig, template: RigidTemplate, seed: int = 0):
    """Tracked/lost gate features from a stream with scripted tracking losses.

    Tracked segments span the scale and rotation range the pipeline will
    see, so the gate keys on responses and face shape rather than one pose.
    """
    script = StreamScript(
        duration=80.0,
        fps=10.0,
        pose_segments=[
            PoseSegment(0.0, 20.0, PoseClass.CORRECT, translation=(0.0, 0.0, DEFAULT_DISTANCE)),
            PoseSegment(20.0, 40.0, PoseClass.TOO_CLOSE, translation=(0.0, 0.0, 360.0)),
            PoseSegment(40.0, 60.0, PoseClass.ASKEW_LEFT, rotation=(0.0, 0.0, -0.45)),
            PoseSegment(
                60.0, 80.0, PoseClass.ASKEW_RIGHT, rotation=(0.0, 0.0, 0.45),
                translation=(20.0, -10.0, 500.0),
            ),
        ],
        tracking_losses=[(10.0, 15.0), (30.0, 35.0), (50.0, 55.0), (70.0, 75.0)],
        sigma=0.5,
    )
    frames, truth = simulate(script, template, cfg.intrinsics, seed=seed)
    lost = np.zeros(len(frames), dtype=bool)
    for a, b in truth.absences:
        lost[a:b] = True
    return [
        (trackfix.reinit_feature(f), -1 if lost[i] else 1) for i, f in enumerate(frames)
    ]


def train_gate_model(cfg: PipelineConfig, template: RigidTemplate, seed: int = 0):
    samples = gate_training_data(cfg, template, seed=seed)
    model = mlkit.train_linear_svm(samples, lam=1e-4, epochs=20, seed=seed)
    acc = _accuracy(samples, lambda x: mlkit.predict(model, x)[1])
    return model, acc


def mouth_training_data(cfg: PipelineConfig, template: RigidTemplate, seed: int = 0):
    """Open/closed mouth features from yawn segments across the pose range.

    Rolled and close-up segments matter: the feature is centered and scaled
    but not rotation-normalized, so the classifier must see tilted mouths.
    """
    script = StreamScript(
        duration=80.0,
        fps=10.0,
        pose_segments=[
            PoseSegment(0.0, 20.0, PoseClass.CORRECT, translation=(0.0, 0.0, DEFAULT_DISTANCE)),
            PoseSegment(20.0, 40.0, PoseClass.TOO_CLOSE, translation=(0.0, 0.0, 360.0)),
            PoseSegment(40.0, 60.0, PoseClass.ASKEW_LEFT, rotation=(0.0, 0.0, -0.45)),
            PoseSegment(
                60.0, 80.0, PoseClass.ASKEW_RIGHT, rotation=(0.0, 0.0, 0.45),
                translation=(30.0, 10.0, 500.0),
            ),
        ],
        yawns=[(5.0, 10.0), (25.0, 30.0), (45.0, 50.0), (65.0, 70.0)],
        sigma=0.5,
    )
    frames, truth = simulate(script, template, cfg.intrinsics, seed=seed)
    open_mask = np.zeros(len(frames), dtype=bool)
    for a, b in truth.yawns:
        open_mask[a:b] = True
    return [
        (features.mouth_feature(f, raw=cfg.mouth_raw), 1 if open_mask[i] else -1)
        for i, f in enumerate(frames)
    ]


def train_mouth_model(cfg: PipelineConfig, template: RigidTemplate, seed: int = 0):
    samples = mouth_training_data(cfg, template, seed=seed)
    model = mlkit.train_linear_svm(samples, lam=1e-4, epochs=20, seed=seed)
    acc = _accuracy(samples, lambda x: mlkit.predict(model, x)[1])
    return model, acc


def _accuracy(samples, predict_fn) -> float:
    hits = sum(1 for x, y in samples if predict_fn(x) == y)
    return hits / len(samples)
