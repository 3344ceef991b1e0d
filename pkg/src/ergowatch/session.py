"""Per-period aggregation, status prediction, alarms, and the session report.

A session is divided into fixed ten-minute periods aligned to its start;
each period collects blink/yawn counts, time-weighted pose-class shares,
and presence, then receives a status label. Crisp continuous-work and
bad-pose timers run across period boundaries and raise alarms that also
feed the recommendation layer's feature snapshot.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .pose import POSE_LABELS, PoseClass
from .recommend import (
    BAD_POSE_FRACTION,
    BAD_POSE_MINUTES,
    BLINK_RATE,
    WORK_MINUTES,
    YAWNS_PER_PERIOD,
)

DEFAULT_PERIOD_SECONDS = 600.0

ABSENT = "absent"
NORMAL = "normal"
BAD_POSE = "bad-pose"
POTENTIAL_FATIGUE = "potential-fatigue"

STATUS_LABELS = (ABSENT, NORMAL, BAD_POSE, POTENTIAL_FATIGUE)

# status thresholds (all configurable through the tracker)
ABSENT_BELOW_PRESENCE = 0.2
FATIGUE_YAWNS = 3
FATIGUE_RATE_FACTOR = 2.0
BAD_POSE_ABOVE = 0.5

WORK_ALARM_MINUTES = 30.0
BAD_POSE_ALARM_MINUTES = 10.0
ABSENCE_RESET_SECONDS = 60.0

REPORT_FORMAT_VERSION = 1


@dataclass
class PeriodStats:
    start: float
    end: float
    blink_count: int = 0
    yawn_count: int = 0
    pose_proportion: dict = field(default_factory=dict)  # label -> share of tracked time
    present_fraction: float = 0.0
    status: str = ABSENT

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "blinks": self.blink_count,
            "yawns": self.yawn_count,
            "pose": {lbl: self.pose_proportion.get(lbl, 0.0) for lbl in POSE_LABELS},
            "present": self.present_fraction,
            "status": self.status,
        }


def predict_status(stats: PeriodStats, history) -> str:
    """Label one period given the preceding ones.

    Priority: absent, then potential fatigue (many yawns, or a clear jump
    over the trailing three-period yawn mean), then bad pose (mostly
    non-neutral head pose), else normal.
    """
    if stats.present_fraction < ABSENT_BELOW_PRESENCE:
        return ABSENT
    trailing = [p.yawn_count for p in list(history)[-3:]]
    mean = sum(trailing) / len(trailing) if trailing else 0.0
    if stats.yawn_count >= FATIGUE_YAWNS:
        return POTENTIAL_FATIGUE
    # rate-jump clause needs a nonzero baseline to be meaningful
    if mean > 0 and stats.yawn_count >= 2 and stats.yawn_count >= FATIGUE_RATE_FACTOR * mean:
        return POTENTIAL_FATIGUE
    non_neutral = sum(v for k, v in stats.pose_proportion.items() if k != PoseClass.CORRECT.value)
    if non_neutral > BAD_POSE_ABOVE:
        return BAD_POSE
    return NORMAL


@dataclass
class Alarm:
    t: float
    kind: str  # "continuous-work" | "bad-pose"
    message: str

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "message": self.message}


class SessionTracker:
    """Single-writer accumulator for one monitoring session."""

    def __init__(
        self,
        period_seconds: float = DEFAULT_PERIOD_SECONDS,
        work_alarm_minutes: float = WORK_ALARM_MINUTES,
        bad_pose_alarm_minutes: float = BAD_POSE_ALARM_MINUTES,
        absence_reset_seconds: float = ABSENCE_RESET_SECONDS,
    ):
        if period_seconds <= 0:
            raise ValueError("period length must be positive")
        self.period_seconds = period_seconds
        self.work_alarm_minutes = work_alarm_minutes
        self.bad_pose_alarm_minutes = bad_pose_alarm_minutes
        self.absence_reset_seconds = absence_reset_seconds

        self.origin: float | None = None
        self.periods: list[PeriodStats] = []
        self.alarms: list[Alarm] = []
        self.total_blinks = 0
        self.total_yawns = 0

        # current-period accumulators
        self._idx = 0
        self._blinks = 0
        self._yawns = 0
        self._pose_time: dict = {}
        self._present_time = 0.0

        # cross-period live timers
        self.work_seconds = 0.0
        self.bad_pose_seconds = 0.0
        self._absent_gap = 0.0
        self._work_alarm_armed = True
        self._pose_alarm_armed = True
        self._recent_blinks: deque = deque()
        self._last_t: float | None = None

    # -- frame/event input ---------------------------------------------------

    def add_frame(self, t: float, present: bool, pose_class: PoseClass | None) -> list[Alarm]:
        """Advance by one frame; returns any alarms that fired at this instant."""
        if self.origin is None:
            self.origin = t
            self._last_t = t
        dt = max(0.0, t - self._last_t) if self._last_t is not None else 0.0
        self._last_t = t
        self._roll_periods(t)

        if present:
            if self._absent_gap >= self.absence_reset_seconds:
                self.work_seconds = 0.0
                self._work_alarm_armed = True
            self._absent_gap = 0.0
            self.work_seconds += dt
            self._present_time += dt
            label = (pose_class or PoseClass.AWAY).value
            self._pose_time[label] = self._pose_time.get(label, 0.0) + dt
            if pose_class is not None and pose_class != PoseClass.CORRECT:
                self.bad_pose_seconds += dt
            else:
                self.bad_pose_seconds = 0.0
                self._pose_alarm_armed = True
        else:
            self._absent_gap += dt
            self.bad_pose_seconds = 0.0
            self._pose_alarm_armed = True
            if self._absent_gap >= self.absence_reset_seconds:
                self.work_seconds = 0.0
                self._work_alarm_armed = True
        while self._recent_blinks and t - self._recent_blinks[0] > 60.0:
            self._recent_blinks.popleft()
        return self.check_alarms(t)

    def add_blink(self, t: float) -> None:
        self._roll_periods(t)
        self._blinks += 1
        self.total_blinks += 1
        self._recent_blinks.append(t)

    def add_yawn(self, t: float) -> None:
        self._roll_periods(t)
        self._yawns += 1
        self.total_yawns += 1

    def check_alarms(self, t: float) -> list[Alarm]:
        """Crisp threshold checks on the live timers; one alarm per episode."""
        fired = []
        if self._work_alarm_armed and self.work_seconds > self.work_alarm_minutes * 60.0:
            fired.append(
                Alarm(t, "continuous-work", f"working continuously over {self.work_alarm_minutes:g} minutes")
            )
            self._work_alarm_armed = False
        if self._pose_alarm_armed and self.bad_pose_seconds > self.bad_pose_alarm_minutes * 60.0:
            fired.append(
                Alarm(t, "bad-pose", f"bad posture held over {self.bad_pose_alarm_minutes:g} minutes")
            )
            self._pose_alarm_armed = False
        self.alarms.extend(fired)
        return fired

    # -- period bookkeeping ----------------------------------------------------

    def _period_bounds(self, idx: int) -> tuple[float, float]:
        assert self.origin is not None
        return (
            self.origin + idx * self.period_seconds,
            self.origin + (idx + 1) * self.period_seconds,
        )

    def _roll_periods(self, t: float) -> None:
        if self.origin is None:
            self.origin = t
        # a timestamp exactly on a boundary belongs to the next period
        while t >= self._period_bounds(self._idx)[1]:
            self._close_period()

    def _close_period(self) -> None:
        start, end = self._period_bounds(self._idx)
        stats = PeriodStats(start=start, end=end, blink_count=self._blinks, yawn_count=self._yawns)
        stats.present_fraction = self._present_time / self.period_seconds
        tracked = sum(self._pose_time.values())
        if tracked > 0:
            stats.pose_proportion = {k: v / tracked for k, v in self._pose_time.items()}
        stats.status = predict_status(stats, self.periods)
        self.periods.append(stats)
        self._idx += 1
        self._blinks = 0
        self._yawns = 0
        self._pose_time = {}
        self._present_time = 0.0

    def finish(self) -> None:
        """Flush the open period (if it saw any time) at end of stream."""
        if self.origin is None:
            return
        if self._present_time > 0 or self._blinks or self._yawns or self._last_t > self._period_bounds(self._idx)[0]:
            self._close_period()

    # -- live views --------------------------------------------------------------

    @property
    def blinks_last_minute(self) -> int:
        return len(self._recent_blinks)

    @property
    def current_period_yawns(self) -> int:
        return self._yawns

    @property
    def currently_present(self) -> bool:
        return self._last_t is not None and self._absent_gap == 0.0

    # -- recommendation feature snapshot ---------------------------------------

    def feature_snapshot(self, t: float) -> dict:
        tracked = sum(self._pose_time.values())
        bad = tracked - self._pose_time.get(PoseClass.CORRECT.value, 0.0)
        return {
            WORK_MINUTES: self.work_seconds / 60.0,
            BAD_POSE_MINUTES: self.bad_pose_seconds / 60.0,
            YAWNS_PER_PERIOD: float(self._yawns),
            BLINK_RATE: float(len(self._recent_blinks)),
            BAD_POSE_FRACTION: (bad / tracked) if tracked > 0 else 0.0,
        }


# ---------------------------------------------------------------------------
# report rendering


def report_dict(tracker: SessionTracker, extra: dict | None = None) -> dict:
    rep = {
        "format_version": REPORT_FORMAT_VERSION,
        "period_seconds": tracker.period_seconds,
        "periods": [p.to_dict() for p in tracker.periods],
        "alarms": [a.to_dict() for a in tracker.alarms],
        "totals": {"blinks": tracker.total_blinks, "yawns": tracker.total_yawns},
    }
    if extra:
        rep.update(extra)
    return rep


def render_report(tracker: SessionTracker, out_dir, extra: dict | None = None) -> dict:
    """Write report.json and the plot-ready report.csv; returns the paths."""
    if not tracker.periods:
        raise ValueError("cannot render a report with no completed periods")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    csv_path = out / "report.csv"
    with open(json_path, "w") as f:
        json.dump(report_dict(tracker, extra), f, indent=2, sort_keys=True)
        f.write("\n")
    write_report_csv(tracker.periods, csv_path)
    return {"json": str(json_path), "csv": str(csv_path)}


def write_report_csv(periods, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["start", "blink", "yawn", "c1", "c2", "c3", "c4", "c5", "status"])
        for p in periods:
            w.writerow(
                [p.start, p.blink_count, p.yawn_count]
                + [f"{p.pose_proportion.get(lbl, 0.0):.6f}" for lbl in POSE_LABELS]
                + [p.status]
            )
