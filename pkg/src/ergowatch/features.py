"""Blink and yawn detection from eye patches and mouth landmarks.

The blink detector normalizes the running eye-patch color against its own
stream statistics, so a fixed threshold works across lighting conditions;
a blink is the open-to-closed transition of that state. Yawns are mouth
classifier opens that persist past a duration threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mlkit
from .stream import (
    LEFT_EYEBALL_ID,
    MOUTH_IDS,
    RIGHT_EYEBALL_ID,
    EyePatch,
    LandmarkFrame,
)

DEFAULT_COLOR_THRESHOLD = 2.5  # standardized patch-color units
DEFAULT_YAWN_SECONDS = 1.5
DEFAULT_PATCH_INDEX = 4800.0  # w_i, h_i: crop is round(index/d) pixels

MOUTH_DIM = 2 * len(MOUTH_IDS)  # 38

OPEN = "open"
CLOSED = "closed"

# report codes for the mouth state
MOUTH_CLOSED_CODE = 1.0
MOUTH_OPEN_CODE = 2.0

BLINK_DEBOUNCE_FRAMES = 2  # transitions this close to a counted blink merge into it


@dataclass
class BlinkDetectorState:
    """Running color statistics for one eye.

    rf weights the running mean/variance updates and sets the warm-up length
    (no verdicts for the first rf frames); ct is the standardized threshold;
    wi/hi map face distance to crop size.
    """

    rf: float
    ct: float = DEFAULT_COLOR_THRESHOLD
    wi: float = DEFAULT_PATCH_INDEX
    hi: float = DEFAULT_PATCH_INDEX
    mean_c: float = 0.0
    var_c: float = 0.0
    frame_count: int = 0
    delta: int | None = None  # 1 open, 0 closed, None while warming up
    data_gap: bool = False

    def __post_init__(self):
        if self.rf <= 0 or self.ct <= 0 or self.wi <= 0 or self.hi <= 0:
            raise ValueError("rf, ct, wi, hi must all be positive")


def _crop_mean(patch: EyePatch, wp: int, hp: int) -> float:
    """Mean of r+g+b over a centered wp x hp crop (per pixel, channels summed)."""
    h, w = patch.pixels.shape[:2]
    wp = min(max(1, wp), w)
    hp = min(max(1, hp), h)
    r0 = (h - hp) // 2
    c0 = (w - wp) // 2
    crop = patch.pixels[r0 : r0 + hp, c0 : c0 + wp]
    return float(crop.sum() / (wp * hp))


def eye_state(state: BlinkDetectorState, patch: EyePatch | None, d: float) -> int | None:
    """Advance one eye's statistics and classify open (1) / closed (0).

    Returns None while warming up (first rf frames) or when the patch is
    missing, in which case state.data_gap is set and the statistics do not
    advance. The running mean is updated before the squared deviation feeds
    the variance, and the normalized color compares against ct: values below
    the threshold read as the (dominant) open state.
    """
    if patch is None:
        state.data_gap = True
        state.delta = None
        return None
    state.data_gap = False
    if d <= 0:
        raise ValueError("face distance must be positive")
    wp = int(round(state.wi / d))
    hp = int(round(state.hi / d))
    cbar = _crop_mean(patch, wp, hp)

    state.frame_count += 1
    rf = state.rf
    state.mean_c = (state.mean_c * rf + cbar) / (rf + 1.0)
    state.var_c = (state.var_c * rf + (cbar - state.mean_c) ** 2) / (rf + 1.0)
    cstar = 0.0 if state.var_c == 0 else (cbar - state.mean_c) / math.sqrt(state.var_c)

    if state.frame_count <= rf:
        state.delta = None
        return None
    state.delta = 1 if cstar < state.ct else 0
    return state.delta


def detect_blink(prev_delta: int | None, new_delta: int | None) -> bool:
    """True exactly on a determinate open-to-closed transition."""
    return prev_delta == 1 and new_delta == 0


@dataclass
class BlinkEvent:
    t: float
    frame: int
    eye: str  # "left" | "right" | "both"


@dataclass
class BlinkTracker:
    """Both-eye blink counting with per-frame dedup and a short debounce."""

    left: BlinkDetectorState
    right: BlinkDetectorState
    last_blink_frame: int | None = None

    def update(self, frame: LandmarkFrame, frame_index: int) -> BlinkEvent | None:
        eyes = frame.eyes
        transitions = []
        for name, st, patch in (
            ("left", self.left, eyes.left if eyes else None),
            ("right", self.right, eyes.right if eyes else None),
        ):
            prev = st.delta
            new = eye_state(st, patch, frame.d)
            if detect_blink(prev, new):
                transitions.append(name)
        if not transitions:
            return None
        if (
            self.last_blink_frame is not None
            and frame_index - self.last_blink_frame <= BLINK_DEBOUNCE_FRAMES
        ):
            return None  # chatter merges into the counted blink
        self.last_blink_frame = frame_index
        eye = "both" if len(transitions) == 2 else transitions[0]
        return BlinkEvent(t=frame.t, frame=frame_index, eye=eye)


# ---------------------------------------------------------------------------
# mouth / yawn


def interocular_distance(frame: LandmarkFrame) -> float:
    return float(
        np.linalg.norm(frame.points[LEFT_EYEBALL_ID] - frame.points[RIGHT_EYEBALL_ID])
    )


def mouth_feature(frame: LandmarkFrame, raw: bool = False) -> np.ndarray:
    """38-vector of mouth landmark coordinates.

    Default form centers the mouth points on their own mass center and scales
    by the interocular distance, making the classifier insensitive to where
    the subject sits; raw=True keeps plain pixel coordinates.
    """
    pts = frame.points[list(MOUTH_IDS)]
    if not raw:
        pts = pts - pts.mean(axis=0)
        iod = interocular_distance(frame)
        if iod > 0:
            pts = pts / iod
    return pts.reshape(-1)


def classify_mouth(model: mlkit.LinearModel, frame: LandmarkFrame, raw: bool = False) -> str:
    """OPEN/CLOSED from the linear mouth model (positive score = open)."""
    if model is None:
        raise ValueError("mouth model not trained")
    _, label = mlkit.predict(model, mouth_feature(frame, raw=raw))
    return OPEN if label > 0 else CLOSED


@dataclass
class YawnEvent:
    t: float  # detection time
    start: float
    duration: float


@dataclass
class YawnDetectorState:
    """Open-interval timer: one event per maximal open run of length >= tt."""

    tt: float = DEFAULT_YAWN_SECONDS
    open_since: float | None = None
    latched: bool = False

    def __post_init__(self):
        if self.tt <= 0:
            raise ValueError("yawn duration threshold must be positive")


def detect_yawn(state: YawnDetectorState, mouth: str, t: float) -> YawnEvent | None:
    """Feed one mouth observation; emits at most one event per open interval."""
    if mouth == CLOSED:
        state.open_since = None
        state.latched = False
        return None
    if state.open_since is None:
        state.open_since = t
        return None
    if not state.latched and t - state.open_since >= state.tt:
        state.latched = True
        return YawnEvent(t=t, start=state.open_since, duration=t - state.open_since)
    return None
