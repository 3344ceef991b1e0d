"""Tracking-layer corrections.

Per-landmark jitter is learned as a Gaussian over consecutive-frame offsets
during a short keep-still period, then suppressed by holding the previous
filtered position whenever an offset falls inside the standardized decision
band. A linear gate over a 228-dim (response, centered x, centered y)
feature detects tracking loss the upstream tracker is unaware of.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import mlkit
from .stream import N_LANDMARKS, LandmarkFrame

JITTER = "jitter"
MOVEMENT = "movement"
TRACKED = "tracked"
LOST = "lost"

MAX_ALPHA = 1.0 / mlkit.SQRT_2PI  # peak of the standard normal density

GATE_DIM = 3 * N_LANDMARKS  # (response, dx, dy) per landmark

JITTER_MODEL_VERSION = 1


class GateUntrainedError(ValueError):
    pass


@dataclass
class JitterModel:
    """Per-landmark offset Gaussians plus the density-threshold decision band.

    `var` is the mean squared deviation of the learned offsets (the second
    moment the estimator produces); standardization uses its square root.
    x2 solves pdf(x2) = alpha on the standard normal, x1 = -x2, and
    in_band_mass = cdf(x2) - cdf(x1) is the mass a true jitter offset has
    of landing inside the band.
    """

    mu: np.ndarray  # (76,) pixels
    var: np.ndarray  # (76,) pixels^2
    alpha: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.var = np.asarray(self.var, dtype=float)
        if self.mu.shape != (N_LANDMARKS,) or self.var.shape != (N_LANDMARKS,):
            raise ValueError(f"mu and var must have {N_LANDMARKS} entries")
        if np.any(self.var < 0):
            raise ValueError("variances must be nonnegative")
        _check_alpha(self.alpha)

    @property
    def x2(self) -> float:
        return math.sqrt(max(0.0, -2.0 * math.log(self.alpha * mlkit.SQRT_2PI)))

    @property
    def x1(self) -> float:
        return -self.x2

    @property
    def in_band_mass(self) -> float:
        _, hi = mlkit.std_normal(self.x2)
        _, lo = mlkit.std_normal(self.x1)
        return hi - lo

    # historical name for the same quantity
    @property
    def Pe(self) -> float:
        return self.in_band_mass

    def to_dict(self) -> dict:
        return {
            "format_version": JITTER_MODEL_VERSION,
            "mu": self.mu.tolist(),
            "var": self.var.tolist(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JitterModel":
        return cls(np.asarray(d["mu"], float), np.asarray(d["var"], float), float(d["alpha"]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "JitterModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _check_alpha(alpha: float) -> None:
    # the right endpoint (peak density) is allowed: the band collapses to x2=0
    if not 0.0 < alpha <= MAX_ALPHA:
        raise ValueError(f"alpha must lie in (0, {MAX_ALPHA:.6f}], got {alpha}")


def learn_jitter(still_frames, alpha: float = 0.05) -> JitterModel:
    """Fit per-landmark offset statistics from a keep-still sequence.

    Offsets are Euclidean displacements between consecutive frames; needs at
    least half a second of frames (ceil(0.5*fps)).
    """
    _check_alpha(alpha)
    frames = list(still_frames)
    if not frames:
        raise ValueError("no frames supplied")
    need = int(math.ceil(0.5 * frames[0].fps))
    if len(frames) < max(need, 2):
        raise ValueError(
            f"need at least {max(need, 2)} still frames (0.5 s at {frames[0].fps} fps), "
            f"got {len(frames)}"
        )
    pts = np.stack([f.points for f in frames])  # (M+1, 76, 2)
    offsets = np.linalg.norm(np.diff(pts, axis=0), axis=2)  # (M, 76)
    mu = offsets.mean(axis=0)
    var = ((offsets - mu) ** 2).mean(axis=0)
    return JitterModel(mu, var, alpha)


def still_anchor(still_frames) -> LandmarkFrame:
    """Best position estimate from the keep-still window: its mean positions.

    Seeding the filter's previous frame with this anchor starts suppression
    from a noise-averaged point instead of a single noisy sample; holding a
    raw sample gains nothing over the raw stream on average.
    """
    frames = list(still_frames)
    if not frames:
        raise ValueError("no frames supplied")
    mean_pts = np.mean([f.points for f in frames], axis=0)
    return replace(frames[-1], points=mean_pts)


def _in_band(model: JitterModel, idx, d):
    """Vectorized band test: True where the offset standardizes into [x1, x2]."""
    d = np.asarray(d, dtype=float)
    mu = model.mu[idx]
    var = model.var[idx]
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (d - mu) / sd
    degenerate = var == 0
    in_band = (model.x1 <= z) & (z <= model.x2)
    return np.where(degenerate, d == mu, in_band)


def classify_offset(model: JitterModel, i: int, d: float) -> str:
    """JITTER if the standardized offset lies inside the decision band.

    Degenerate landmarks (var == 0) count as jitter only on an exact match
    with the learned mean.
    """
    return JITTER if bool(_in_band(model, i, d)) else MOVEMENT


def classify_offsets(model: JitterModel, i: int, d) -> np.ndarray:
    """Band test for many offsets of one landmark; True means jitter."""
    return _in_band(model, i, np.asarray(d, dtype=float))


@dataclass
class TrackState:
    """Mutable per-session tracking state; single writer."""

    jitter: JitterModel | None = None
    gate_model: mlkit.LinearModel | None = None
    previous: LandmarkFrame | None = None
    status: str = TRACKED

    def reset(self) -> None:
        self.previous = None
        self.status = TRACKED


def filter_frame(state: TrackState, frame: LandmarkFrame) -> LandmarkFrame:
    """Suppress in-band landmark offsets by holding the previous filtered point.

    Movement-classified landmarks pass through unchanged; the state's
    previous frame advances to the returned frame either way.
    """
    if state.jitter is None:
        raise ValueError("jitter model not learned")
    if state.previous is None:
        state.previous = frame
        return frame
    prev_pts = state.previous.points
    offsets = np.linalg.norm(frame.points - prev_pts, axis=1)
    hold = _in_band(state.jitter, np.arange(N_LANDMARKS), offsets)
    new_pts = np.where(hold[:, None], prev_pts, frame.points)
    out = replace(frame, points=new_pts)
    state.previous = out
    return out


def reinit_feature(frame: LandmarkFrame) -> np.ndarray:
    """228-dim gate feature: per landmark (response, x - x̄, y - ȳ).

    Coordinates are taken relative to the landmark mass center, which makes
    the feature invariant to where the face sits in the image.
    """
    center = frame.points.mean(axis=0)
    rel = frame.points - center
    feat = np.empty(GATE_DIM)
    feat[0::3] = frame.responses
    feat[1::3] = rel[:, 0]
    feat[2::3] = rel[:, 1]
    return feat


def gate(state: TrackState, feature) -> str:
    """LOST when the gate score is negative; updates the state's status."""
    if state.gate_model is None:
        raise GateUntrainedError("gate model not trained")
    score, _ = mlkit.predict(state.gate_model, feature)
    state.status = LOST if score < 0 else TRACKED
    return state.status
