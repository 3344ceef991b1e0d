"""Frame-by-frame orchestration of the full monitoring stack.

ingest -> jitter filter + loss gate -> head pose -> blink/yawn detection
-> recommendation -> session aggregation. One Pipeline instance owns all
mutable state and must be driven by a single thread; snapshot() publishes
an immutable view for concurrent readers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from . import features, mlkit, recommend, session, trackfix
from .config import PipelineConfig
from .pose import (
    NoConvergenceError,
    Pose,
    PoseClass,
    RigidTemplate,
    classify_pose,
    pose_features,
    solve_pnp,
)
from .recommend import AdaptiveRules, RuleSet, default_rules
from .session import SessionTracker
from .stream import RIGID_IDS, LandmarkFrame

SNAPSHOT_SCHEMA_VERSION = 1

logger = logging.getLogger(__name__)


@dataclass
class ModelBundle:
    gate: mlkit.LinearModel
    pose: mlkit.MulticlassModel
    mouth: mlkit.LinearModel

    @classmethod
    def load(cls, cfg: PipelineConfig) -> "ModelBundle":
        return cls(
            gate=mlkit.load_model(cfg.gate_model),
            pose=mlkit.load_model(cfg.pose_model),
            mouth=mlkit.load_model(cfg.mouth_model),
        )


@dataclass
class ActiveRecommendation:
    rec_id: int
    action: str
    confidence: float
    rule_name: str
    since: float
    theta: tuple  # premise context at decision time


class Pipeline:
    def __init__(
        self,
        cfg: PipelineConfig,
        models: ModelBundle,
        template: RigidTemplate | None = None,
        ruleset: RuleSet | None = None,
    ):
        self.cfg = cfg
        self.models = models
        self.template = template if template is not None else RigidTemplate.load(cfg.template_path())
        rules = ruleset if ruleset is not None else (
            RuleSet.load(cfg.rules) if cfg.rules else default_rules()
        )
        if rules.adapt_alpha != cfg.adapt_alpha:
            rules = RuleSet(
                rules.rules, adapt_alpha=cfg.adapt_alpha, ridge=rules.ridge, threshold=rules.threshold
            )
        self.engine = AdaptiveRules(
            rules,
            batch=cfg.feedback_batch if cfg.feedback_batch > 0 else None,
            window=cfg.feedback_window,
        )

        self.track = trackfix.TrackState(gate_model=models.gate)
        self._learn_frames: list[LandmarkFrame] = []
        self._learn_target = None  # frames needed before the jitter model exists

        self.blinks = features.BlinkTracker(
            left=features.BlinkDetectorState(rf=1.0, ct=cfg.blink_ct, wi=cfg.patch_wi, hi=cfg.patch_hi),
            right=features.BlinkDetectorState(rf=1.0, ct=cfg.blink_ct, wi=cfg.patch_wi, hi=cfg.patch_hi),
        )
        self._blink_rf_set = False
        self.yawns = features.YawnDetectorState(tt=cfg.yawn_tt)

        self.session = SessionTracker(
            period_seconds=cfg.period_seconds,
            work_alarm_minutes=cfg.work_alarm_minutes,
            bad_pose_alarm_minutes=cfg.bad_pose_alarm_minutes,
            absence_reset_seconds=cfg.absence_reset_seconds,
        )

        self.events: list[dict] = []  # chronological blink/yawn/alarm records
        self.feedback_log: list[dict] = []
        self.frame_index = 0
        self.last_pose: Pose | None = None
        self._last_rigid_pts = None
        self.last_pose_class: PoseClass = PoseClass.AWAY
        self.active_rec: ActiveRecommendation | None = None
        self._rec_counter = 0
        self._last_t: float | None = None
        self._mouth_state = features.CLOSED

    # -- per-frame ----------------------------------------------------------

    def process(self, frame: LandmarkFrame) -> dict:
        """Advance all layers by one frame; returns a summary for this frame."""
        cfg = self.cfg
        if not self._blink_rf_set:
            rf = cfg.blink_rf if cfg.blink_rf > 0 else frame.fps
            self.blinks.left.rf = rf
            self.blinks.right.rf = rf
            self._learn_target = max(2, int(np.ceil(cfg.jitter_learn_seconds * frame.fps)))
            self._blink_rf_set = True

        i = self.frame_index
        self.frame_index += 1
        t = frame.t
        self._last_t = t

        present = bool(frame.tracked)
        pose_class = PoseClass.AWAY
        filtered = frame

        if present and self.track.jitter is None:
            # keep-still learning window at session start
            self._learn_frames.append(frame)
            if len(self._learn_frames) >= self._learn_target:
                self.track.jitter = trackfix.learn_jitter(self._learn_frames, cfg.jitter_alpha)
                self.track.previous = trackfix.still_anchor(self._learn_frames)
                self._learn_frames = []
            self.session.add_frame(t, False, None)
            return self._frame_summary(t, False, PoseClass.AWAY)

        if present:
            filtered = trackfix.filter_frame(self.track, frame)
            feature = trackfix.reinit_feature(filtered)
            if trackfix.gate(self.track, feature) == trackfix.LOST:
                present = False  # suppressed until the stream re-locks

        if present:
            pose_class = self._pose_step(filtered)
            self._feature_step(filtered, i)
        else:
            self.last_pose = None  # next solve restarts from the grid
            self._last_rigid_pts = None
            self.yawns.open_since = None
            self.yawns.latched = False

        alarms = self.session.add_frame(t, present, pose_class if present else None)
        for a in alarms:
            self.events.append({"type": "alarm", "t": a.t, "kind": a.kind})
        self._recommend_step(t)
        return self._frame_summary(t, present, pose_class)

    def _pose_step(self, frame: LandmarkFrame) -> PoseClass:
        pts2d = frame.points[list(RIGID_IDS)]
        if (
            self.last_pose is not None
            and self._last_rigid_pts is not None
            and np.array_equal(pts2d, self._last_rigid_pts)
        ):
            return self.last_pose_class  # held landmarks: identical solve input
        try:
            pose = solve_pnp(pts2d, self.template, self.cfg.intrinsics, init=self.last_pose)
        except NoConvergenceError as e:
            pose = e.best
            self.last_pose = None
            self._last_rigid_pts = None
        else:
            self.last_pose = pose
            self._last_rigid_pts = pts2d
        feats = pose_features(pose, self.template.span)
        self.last_pose_class = classify_pose(self.models.pose, feats)
        return self.last_pose_class

    def _feature_step(self, frame: LandmarkFrame, frame_index: int) -> None:
        blink = self.blinks.update(frame, frame_index)
        if blink is not None:
            self.session.add_blink(blink.t)
            self.events.append({"type": "blink", "t": blink.t, "eye": blink.eye})
        mouth = features.classify_mouth(self.models.mouth, frame, raw=self.cfg.mouth_raw)
        self._mouth_state = mouth
        yawn = features.detect_yawn(self.yawns, mouth, frame.t)
        if yawn is not None:
            self.session.add_yawn(yawn.t)
            self.events.append(
                {"type": "yawn", "t": yawn.t, "duration": round(yawn.duration, 6)}
            )

    def _recommend_step(self, t: float) -> None:
        snapshot = self.session.feature_snapshot(t)
        rules = self.engine.ruleset
        theta = recommend.eval_premises(rules, snapshot)
        f = recommend.infer(rules, theta)
        rec = None
        if f is not None:
            _, xi = recommend.activations(theta)
            rec = recommend.decide(rules, f, xi)
        if rec is None:
            self.active_rec = None
            return
        if self.active_rec is not None and self.active_rec.action == rec.action:
            self.active_rec.confidence = rec.confidence
            self.active_rec.theta = tuple(tuple(r) for r in theta)
            return
        self._rec_counter += 1
        self.active_rec = ActiveRecommendation(
            rec_id=self._rec_counter,
            action=rec.action,
            confidence=rec.confidence,
            rule_name=rec.rule_name,
            since=t,
            theta=tuple(tuple(r) for r in theta),
        )

    # -- feedback -------------------------------------------------------------

    def feedback(self, action: str, rec_id: int | None = None) -> dict:
        """Route one like/dislike at the active recommendation.

        Returns an outcome record; without an active recommendation the event
        is ignored (callers surface that as a semantic rejection).
        """
        if action not in (recommend.LIKE, recommend.DISLIKE):
            return {"accepted": False, "reason": f"unknown action {action!r}"}
        rec = self.active_rec
        if rec is None:
            logger.warning("feedback %r ignored: no active recommendation", action)
            return {"accepted": False, "reason": "no active recommendation"}
        if rec_id is not None and rec_id != rec.rec_id:
            return {"accepted": False, "reason": f"recommendation {rec_id} is not active"}
        already = any(e["rec_id"] == rec.rec_id for e in self.feedback_log)
        if already:
            return {"accepted": True, "deduplicated": True, "rec_id": rec.rec_id}
        t = self._last_t if self._last_t is not None else 0.0
        self.engine.feedback(action, rec.theta, t)
        entry = {
            "rec_id": rec.rec_id,
            "action": action,
            "t": t,
            "sample": recommend.FeedbackSample(
                rec.theta, 1.0 if action == recommend.LIKE else -1.0, t
            ).to_dict(),
        }
        self.feedback_log.append(entry)
        return {"accepted": True, "rec_id": rec.rec_id, "weights": self.engine.ruleset.b.tolist()}

    # -- outputs ----------------------------------------------------------------

    def _frame_summary(self, t: float, present: bool, pose_class: PoseClass) -> dict:
        return {"t": t, "present": present, "pose": pose_class.value}

    def snapshot(self) -> dict:
        """Consistent live view for the service; built atomically per frame."""
        rec = self.active_rec
        return {
            "schema_version": SNAPSHOT_SCHEMA_VERSION,
            "t": self._last_t,
            "frame": self.frame_index,
            "pose_class": self.last_pose_class.value,
            "present": self.session.currently_present,
            "blink_rate_60s": self.session.blinks_last_minute,
            "yawn_count_period": self.session.current_period_yawns,
            "mouth": features.MOUTH_OPEN_CODE
            if self._mouth_state == features.OPEN
            else features.MOUTH_CLOSED_CODE,
            "recommendation": None
            if rec is None
            else {
                "id": rec.rec_id,
                "action": rec.action,
                "confidence": rec.confidence,
                "rule": rec.rule_name,
                "since": rec.since,
            },
            "weights_b": self.engine.ruleset.b.tolist(),
            "events_seen": len(self.events),
        }

    def finish(self) -> None:
        self.session.finish()

    def run(self, frames) -> None:
        for frame in frames:
            self.process(frame)
        self.finish()

    def write_events(self, path) -> None:
        with open(path, "w") as f:
            for e in self.events:
                f.write(json.dumps(e, sort_keys=True))
                f.write("\n")

    def write_feedback_log(self, path) -> None:
        with open(path, "w") as f:
            for e in self.feedback_log:
                f.write(json.dumps(e, sort_keys=True))
                f.write("\n")

    def write_report(self, out_dir) -> dict:
        return session.render_report(
            self.session,
            out_dir,
            extra={"weights_b": self.engine.ruleset.b.tolist()},
        )
