"""Landmark frame streams: JSONL ingest/serialize and a scripted simulator.

A frame is 76 image-plane landmarks plus per-landmark template-match
responses, the face-camera distance, and optional eyeball patch rasters.
The simulator renders a rigid 3D face layout under scripted poses and
produces ground-truth event annotations for testing every downstream layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .pose import (
    RIGID_IDS,
    CameraIntrinsics,
    Pose,
    PoseClass,
    RigidTemplate,
    project,
)

N_LANDMARKS = 76

# landmark id blocks (0-based): 15 chin, 6+6 brows, 9+9 eyes, 12 nose
# (split around the mouth), 19 mouth
CHIN_IDS = range(0, 15)
BROW_IDS = range(15, 27)
EYE_IDS = range(27, 45)
LEFT_EYEBALL_ID = 35
RIGHT_EYEBALL_ID = 44
MOUTH_IDS = range(48, 67)
NOSE_IDS = tuple(range(45, 48)) + tuple(range(67, 76))

PATCH_SIZE = 16  # eye rasters are fixed 16x16; detectors crop at runtime

# simulator raster conventions: open eye shows the dark pupil, a closed
# eye shows skin; chosen for clear separation, not measured values
OPEN_EYE_LEVEL = 60.0
CLOSED_EYE_LEVEL = 180.0
_LEVEL_JITTER = 10.0
_PIXEL_NOISE = 2.0

DEFAULT_DISTANCE = 600.0  # model units; nominal face-camera distance


class StreamError(ValueError):
    pass


class ParseError(StreamError):
    """Record is not valid JSON."""


class SchemaError(StreamError):
    """Record parses but violates the frame schema."""


@dataclass
class EyePatch:
    """Small RGB raster centered on an eyeball landmark."""

    center: tuple[float, float]
    pixels: np.ndarray  # (H, W, 3), values in [0, 255]

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise SchemaError("eye patch must be an HxWx3 raster")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise SchemaError("eye patch must be at least 1x1")
        if np.any(self.pixels < 0) or np.any(self.pixels > 255):
            raise SchemaError("eye patch values must lie in [0, 255]")
        self.center = (float(self.center[0]), float(self.center[1]))

    def __eq__(self, other):
        return (
            isinstance(other, EyePatch)
            and self.center == other.center
            and self.pixels.shape == other.pixels.shape
            and bool(np.all(self.pixels == other.pixels))
        )


@dataclass
class EyePair:
    left: EyePatch | None = None
    right: EyePatch | None = None


@dataclass(eq=False)
class LandmarkFrame:
    """One timestamped frame of the landmark stream. Immutable by convention."""

    t: float
    fps: float
    points: np.ndarray  # (76, 2) pixels
    d: float  # face-camera distance, same unit system as the patch size indices
    responses: np.ndarray | None = None  # (76,) in [0, 1]; defaults to all ones
    tracked: bool = True
    eyes: EyePair | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape != (N_LANDMARKS, 2):
            raise SchemaError(
                f"expected {N_LANDMARKS} landmark points, got shape {self.points.shape}"
            )
        if self.responses is None:
            self.responses = np.ones(N_LANDMARKS)
        else:
            self.responses = np.asarray(self.responses, dtype=float)
            if self.responses.shape != (N_LANDMARKS,):
                raise SchemaError(f"expected {N_LANDMARKS} response values")
            if np.any(self.responses < 0) or np.any(self.responses > 1):
                raise SchemaError("responses must lie in [0, 1]")
        if not self.fps > 0:
            raise SchemaError("fps must be positive")
        if not self.d > 0:
            raise SchemaError("face distance must be positive")

    def __eq__(self, other):
        if not isinstance(other, LandmarkFrame):
            return NotImplemented
        return (
            self.t == other.t
            and self.fps == other.fps
            and self.d == other.d
            and self.tracked == other.tracked
            and bool(np.all(self.points == other.points))
            and bool(np.all(self.responses == other.responses))
            and _eyes_equal(self.eyes, other.eyes)
        )


def _eyes_equal(a: EyePair | None, b: EyePair | None) -> bool:
    if a is None or b is None:
        return a is b or (a is None and b is None)
    return a.left == b.left and a.right == b.right


# ---------------------------------------------------------------------------
# JSONL frame records


def _patch_to_obj(p: EyePatch) -> dict:
    return {"cx": p.center[0], "cy": p.center[1], "px": p.pixels.tolist()}


def _patch_from_obj(obj) -> EyePatch:
    return EyePatch((obj["cx"], obj["cy"]), np.asarray(obj["px"], dtype=float))


def serialize_frame(frame: LandmarkFrame) -> str:
    """One JSONL record; parse_frame(serialize_frame(f)) == f exactly."""
    rec = {
        "t": frame.t,
        "fps": frame.fps,
        "d": frame.d,
        "points": frame.points.tolist(),
        "responses": frame.responses.tolist(),
        "tracked": frame.tracked,
    }
    if frame.eyes is not None:
        eyes = {}
        if frame.eyes.left is not None:
            eyes["left"] = _patch_to_obj(frame.eyes.left)
        if frame.eyes.right is not None:
            eyes["right"] = _patch_to_obj(frame.eyes.right)
        rec["eyes"] = eyes
    return json.dumps(rec, separators=(",", ":"))


def parse_frame(line: str, lineno: int | None = None) -> LandmarkFrame:
    """Parse one JSONL frame record; optional fields get documented defaults."""
    where = f"line {lineno}: " if lineno is not None else ""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(f"{where}malformed frame record: {e}") from None
    if not isinstance(rec, dict):
        raise ParseError(f"{where}frame record must be a JSON object")
    try:
        eyes = None
        if "eyes" in rec and rec["eyes"] is not None:
            eyes = EyePair(
                left=_patch_from_obj(rec["eyes"]["left"]) if "left" in rec["eyes"] else None,
                right=_patch_from_obj(rec["eyes"]["right"]) if "right" in rec["eyes"] else None,
            )
        return LandmarkFrame(
            t=float(rec["t"]),
            fps=float(rec["fps"]),
            points=np.asarray(rec["points"], dtype=float),
            d=float(rec["d"]),
            responses=None if "responses" not in rec else np.asarray(rec["responses"], dtype=float),
            tracked=bool(rec.get("tracked", True)),
            eyes=eyes,
        )
    except KeyError as e:
        raise SchemaError(f"{where}missing required field {e.args[0]!r}") from None
    except (TypeError, SchemaError) as e:
        raise SchemaError(f"{where}{e}") from None


def read_stream(path):
    """Yield frames from a JSONL file, enforcing strictly increasing t."""
    last_t = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            frame = parse_frame(line, lineno)
            if last_t is not None and frame.t <= last_t:
                raise SchemaError(f"line {lineno}: timestamps must be strictly increasing")
            last_t = frame.t
            yield frame


def write_stream(frames, path) -> int:
    n = 0
    with open(path, "w") as f:
        for frame in frames:
            f.write(serialize_frame(frame))
            f.write("\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# canonical face layout


def _ellipse(n, cx, cy, rx, ry, z):
    ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return np.stack([cx + rx * np.cos(ang), cy + ry * np.sin(ang), np.full(n, float(z))], axis=1)


def canonical_face() -> np.ndarray:
    """Generic adult face layout, (76, 3) in mm-scale model units.

    Model axes: x right, y down, z away from the camera; the nose area
    (landmark 67) anchors the origin so the rigid subset satisfies the
    template convention.
    """
    pts = np.zeros((N_LANDMARKS, 3))
    # chin arc 0-14, ear level down to the chin tip and back up
    ang = np.linspace(math.pi, 2 * math.pi, 15)
    pts[0:15, 0] = 70.0 * np.cos(ang)
    pts[0:15, 1] = 15.0 - 80.0 * np.sin(ang)
    pts[0:15, 2] = 45.0 - 20.0 * np.abs(np.cos(ang))
    # brows 15-20 (left), 21-26 (right)
    xs = np.linspace(-52.0, -14.0, 6)
    pts[15:21] = np.stack([xs, -38.0 + 4.0 * np.cos(np.linspace(-1, 1, 6)), np.full(6, 28.0)], axis=1)
    pts[21:27] = pts[15:21] * [-1, 1, 1]
    # eyes: 8-point contours + eyeball centers (35 left, 44 right)
    pts[27:35] = _ellipse(8, -32.0, -20.0, 15.0, 6.0, 35.0)
    pts[35] = (-32.0, -20.0, 37.0)
    pts[36:44] = _ellipse(8, 32.0, -20.0, 15.0, 6.0, 35.0)
    pts[44] = (32.0, -20.0, 37.0)
    # nose bridge 45-47
    pts[45] = (0.0, -30.0, 16.0)
    pts[46] = (-7.0, -14.0, 18.0)
    pts[47] = (7.0, -14.0, 18.0)
    # mouth 48-66: 12-point outer lip, 7-point inner lip
    pts[48:60] = _ellipse(12, 0.0, 42.0, 26.0, 10.0, 24.0)
    pts[60:67] = _ellipse(7, 0.0, 42.0, 16.0, 4.5, 23.0)
    # nose tip (origin) and base 67-75
    pts[67] = (0.0, 0.0, 0.0)
    xs = np.linspace(-14.0, 14.0, 8)
    pts[68:76] = np.stack([xs, 10.0 - 3.0 * np.cos(xs / 14.0), 6.0 + 0.4 * np.abs(xs)], axis=1)
    return pts


def canonical_rigid_template() -> RigidTemplate:
    face = canonical_face()
    return RigidTemplate(RIGID_IDS, face[list(RIGID_IDS)])


def default_intrinsics() -> CameraIntrinsics:
    # fixed values for a 640x480 stream; configurable, never calibrated
    return CameraIntrinsics(fx=640.0, fy=640.0, cx=320.0, cy=240.0)


# mouth-opening displacement (model units): lower-lip landmarks drop,
# increasing the vertical spread the mouth classifier keys on
def _mouth_open_offsets() -> np.ndarray:
    off = np.zeros((N_LANDMARKS, 3))
    outer = np.arange(48, 60)
    inner = np.arange(60, 67)
    face = canonical_face()
    for ids, amount in ((outer, 16.0), (inner, 14.0)):
        lower = face[ids, 1] > face[ids, 1].mean()
        off[ids[lower], 1] = amount
        off[ids[~lower], 1] = -3.0
    return off


MOUTH_OPEN_OFFSETS = _mouth_open_offsets()


# ---------------------------------------------------------------------------
# scripted streams


@dataclass
class PoseSegment:
    start: float
    end: float
    label: PoseClass
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)  # axis-angle
    translation: tuple[float, float, float] = (0.0, 0.0, DEFAULT_DISTANCE)
    rotation_end: tuple[float, float, float] | None = None  # linear sweep when set
    translation_end: tuple[float, float, float] | None = None


@dataclass
class StreamScript:
    """Scenario description; doubles as the ground truth for acceptance runs."""

    duration: float
    fps: float
    pose_segments: list[PoseSegment] = field(default_factory=list)
    blinks: list[float] = field(default_factory=list)
    yawns: list[tuple[float, float]] = field(default_factory=list)
    absences: list[tuple[float, float]] = field(default_factory=list)
    tracking_losses: list[tuple[float, float]] = field(default_factory=list)
    sigma: float = 0.0  # landmark noise, pixels

    def validate(self) -> None:
        if self.duration <= 0 or self.fps <= 0:
            raise StreamError("duration and fps must be positive")
        if self.sigma < 0:
            raise StreamError("sigma must be nonnegative")
        for name, spans in (
            ("pose_segments", [(s.start, s.end) for s in self.pose_segments]),
            ("yawns", self.yawns),
            ("absences", self.absences),
            ("tracking_losses", self.tracking_losses),
        ):
            last_end = -math.inf
            for s, e in sorted(spans):
                if not (0 <= s < e <= self.duration):
                    raise StreamError(f"{name}: span ({s}, {e}) outside [0, {self.duration}]")
                if s < last_end:
                    raise StreamError(f"{name}: overlapping spans")
                last_end = e
        for b in self.blinks:
            if not 0 <= b <= self.duration:
                raise StreamError(f"blink time {b} outside [0, {self.duration}]")

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "fps": self.fps,
            "pose_segments": [
                {
                    "start": s.start,
                    "end": s.end,
                    "label": s.label.value,
                    "rotation": list(s.rotation),
                    "translation": list(s.translation),
                    **({"rotation_end": list(s.rotation_end)} if s.rotation_end else {}),
                    **({"translation_end": list(s.translation_end)} if s.translation_end else {}),
                }
                for s in self.pose_segments
            ],
            "blinks": list(self.blinks),
            "yawns": [list(x) for x in self.yawns],
            "absences": [list(x) for x in self.absences],
            "tracking_losses": [list(x) for x in self.tracking_losses],
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamScript":
        segs = [
            PoseSegment(
                start=float(s["start"]),
                end=float(s["end"]),
                label=PoseClass(s.get("label", "C2")),
                rotation=tuple(s.get("rotation", (0.0, 0.0, 0.0))),
                translation=tuple(s.get("translation", (0.0, 0.0, DEFAULT_DISTANCE))),
                rotation_end=tuple(s["rotation_end"]) if s.get("rotation_end") else None,
                translation_end=tuple(s["translation_end"]) if s.get("translation_end") else None,
            )
            for s in d.get("pose_segments", [])
        ]
        return cls(
            duration=float(d["duration"]),
            fps=float(d["fps"]),
            pose_segments=segs,
            blinks=[float(x) for x in d.get("blinks", [])],
            yawns=[tuple(map(float, x)) for x in d.get("yawns", [])],
            absences=[tuple(map(float, x)) for x in d.get("absences", [])],
            tracking_losses=[tuple(map(float, x)) for x in d.get("tracking_losses", [])],
            sigma=float(d.get("sigma", 0.0)),
        )

    @classmethod
    def load(cls, path) -> "StreamScript":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


@dataclass
class GroundTruth:
    """Script events mapped to frame indices, for scoring pipeline output."""

    blinks: list[int] = field(default_factory=list)
    yawns: list[tuple[int, int]] = field(default_factory=list)
    poses: list[tuple[int, int, str]] = field(default_factory=list)
    absences: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "blinks": list(self.blinks),
            "yawns": [list(x) for x in self.yawns],
            "poses": [[a, b, lbl] for a, b, lbl in self.poses],
            "absences": [list(x) for x in self.absences],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            blinks=[int(x) for x in d.get("blinks", [])],
            yawns=[tuple(map(int, x)) for x in d.get("yawns", [])],
            poses=[(int(a), int(b), str(lbl)) for a, b, lbl in d.get("poses", [])],
            absences=[tuple(map(int, x)) for x in d.get("absences", [])],
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _span_to_frames(span: tuple[float, float], fps: float, n: int) -> tuple[int, int]:
    s = int(math.ceil(span[0] * fps - 1e-9))
    e = int(math.ceil(span[1] * fps - 1e-9))
    return max(0, s), min(n, e)


def _make_patch(rng: np.random.Generator, center, closed: bool) -> EyePatch:
    level = (CLOSED_EYE_LEVEL if closed else OPEN_EYE_LEVEL) + rng.uniform(
        -_LEVEL_JITTER, _LEVEL_JITTER
    )
    px = level + rng.normal(0.0, _PIXEL_NOISE, (PATCH_SIZE, PATCH_SIZE, 3))
    return EyePatch(center, np.clip(px, 0.0, 255.0))


def simulate(
    script: StreamScript,
    template: RigidTemplate,
    intrinsics: CameraIntrinsics,
    seed: int = 0,
) -> tuple[list[LandmarkFrame], GroundTruth]:
    """Render a scripted stream; returns frames plus frame-indexed ground truth.

    Rigid landmarks are exact projections of `template` under the scripted
    pose (plus noise when sigma > 0); the remaining landmarks come from the
    canonical face layout with the template substituted in. Blinks flip the
    eye patches to skin tone for 3-5 frames; yawns open the mouth landmarks;
    absences emit tracked=False; tracking losses keep tracked=True but emit
    scattered landmarks with near-zero responses (the gate's job to catch).
    """
    gen, truth = simulate_stream(script, template, intrinsics, seed=seed)
    return list(gen), truth


def simulate_stream(
    script: StreamScript,
    template: RigidTemplate,
    intrinsics: CameraIntrinsics,
    seed: int = 0,
):
    """Like simulate but yields frames lazily; hour-scale streams with eye
    rasters do not fit in memory as a list. Same seed, same frames."""
    script.validate()
    rng = np.random.default_rng(seed)
    n_frames = int(math.floor(script.duration * script.fps))
    fps = script.fps

    # per-frame event masks
    blink_frames = np.zeros(n_frames, dtype=int)  # >0: frames remaining closed
    truth_blinks = []
    for tb in sorted(script.blinks):
        i = int(round(tb * fps))
        if 0 <= i < n_frames:
            blink_frames[i] = rng.integers(3, 6)
            truth_blinks.append(i)
    yawn_mask = np.zeros(n_frames, dtype=bool)
    truth_yawns = []
    for span in script.yawns:
        a, b = _span_to_frames(span, fps, n_frames)
        yawn_mask[a:b] = True
        truth_yawns.append((a, b))
    absent_mask = np.zeros(n_frames, dtype=bool)
    loss_mask = np.zeros(n_frames, dtype=bool)
    for span in script.absences:
        a, b = _span_to_frames(span, fps, n_frames)
        absent_mask[a:b] = True
    for span in script.tracking_losses:
        a, b = _span_to_frames(span, fps, n_frames)
        loss_mask[a:b] = True
    truth_absent = _mask_to_spans(absent_mask | loss_mask)

    segments = sorted(script.pose_segments, key=lambda s: s.start)
    truth_poses = [
        (*_span_to_frames((s.start, s.end), fps, n_frames), s.label.value) for s in segments
    ]
    truth = GroundTruth(
        blinks=truth_blinks, yawns=truth_yawns, poses=truth_poses, absences=truth_absent
    )

    def frames():
        face = canonical_face()
        face[list(template.ids)] = template.points
        closed_left = 0
        last_d = DEFAULT_DISTANCE
        seg_idx = 0
        for i in range(n_frames):
            t = i / fps
            while seg_idx < len(segments) and segments[seg_idx].end <= t:
                seg_idx += 1
            rot = np.zeros(3)
            trans = np.array([0.0, 0.0, DEFAULT_DISTANCE])
            if seg_idx < len(segments) and segments[seg_idx].start <= t:
                seg = segments[seg_idx]
                frac = (t - seg.start) / max(seg.end - seg.start, 1e-9)
                rot = np.asarray(seg.rotation, dtype=float)
                trans = np.asarray(seg.translation, dtype=float)
                if seg.rotation_end is not None:
                    rot = rot + frac * (np.asarray(seg.rotation_end) - rot)
                if seg.translation_end is not None:
                    trans = trans + frac * (np.asarray(seg.translation_end) - trans)

            if absent_mask[i] or loss_mask[i]:
                pts = np.stack(
                    [
                        rng.uniform(0.0, 2 * intrinsics.cx, N_LANDMARKS),
                        rng.uniform(0.0, 2 * intrinsics.cy, N_LANDMARKS),
                    ],
                    axis=1,
                )
                yield LandmarkFrame(
                    t=t,
                    fps=fps,
                    points=pts,
                    d=last_d,
                    responses=rng.uniform(0.0, 0.12, N_LANDMARKS),
                    tracked=bool(loss_mask[i]),  # loss: tracker is deluded
                    eyes=None,
                )
                continue

            pose = Pose(rot, trans)
            pts3 = face
            if yawn_mask[i]:
                pts3 = face + MOUTH_OPEN_OFFSETS
            pts = project(pts3, pose, intrinsics)
            if script.sigma > 0:
                pts = pts + rng.normal(0.0, script.sigma, (N_LANDMARKS, 2))

            if blink_frames[i] > 0:
                closed_left = int(blink_frames[i])
            closed = closed_left > 0
            if closed_left > 0:
                closed_left -= 1

            last_d = float(trans[2])
            eyes = EyePair(
                left=_make_patch(rng, tuple(pts[LEFT_EYEBALL_ID]), closed),
                right=_make_patch(rng, tuple(pts[RIGHT_EYEBALL_ID]), closed),
            )
            yield LandmarkFrame(
                t=t,
                fps=fps,
                points=pts,
                d=last_d,
                responses=np.clip(rng.normal(0.97, 0.015, N_LANDMARKS), 0.0, 1.0),
                tracked=True,
                eyes=eyes,
            )

    return frames(), truth


def _mask_to_spans(mask: np.ndarray) -> list[tuple[int, int]]:
    spans = []
    start = None
    for i, on in enumerate(mask):
        if on and start is None:
            start = i
        elif not on and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(mask)))
    return spans
