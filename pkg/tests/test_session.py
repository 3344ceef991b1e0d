import csv
import json

import pytest

from ergowatch.pose import PoseClass
from ergowatch.recommend import BAD_POSE_MINUTES, WORK_MINUTES, YAWNS_PER_PERIOD
from ergowatch.session import (
    ABSENT,
    BAD_POSE,
    NORMAL,
    POTENTIAL_FATIGUE,
    PeriodStats,
    SessionTracker,
    predict_status,
    render_report,
)


def drive(tracker, spans, fps=2.0):
    """spans: (seconds, present, pose_class) chunks fed frame by frame."""
    t = 0.0
    dt = 1.0 / fps
    for seconds, present, pose in spans:
        for _ in range(int(seconds * fps)):
            tracker.add_frame(t, present, pose)
            t += dt
    return t


class TestAccumulate:
    def test_empty_period_is_absent(self):
        tr = SessionTracker(period_seconds=60.0)
        drive(tr, [(120.0, False, None)], fps=1.0)
        tr.finish()
        assert len(tr.periods) == 2
        assert all(p.status == ABSENT and p.blink_count == 0 for p in tr.periods)
        assert all(p.present_fraction == 0.0 for p in tr.periods)

    def test_counts_are_exact(self):
        tr = SessionTracker(period_seconds=60.0)
        blinks = [3.0, 10.0, 61.0]
        yawns = [30.0]
        t = 0.0
        for k in range(240):
            tr.add_frame(t, True, PoseClass.CORRECT)
            while blinks and blinks[0] <= t:
                tr.add_blink(blinks.pop(0))
            while yawns and yawns[0] <= t:
                tr.add_yawn(yawns.pop(0))
            t += 0.5
        tr.finish()
        assert [p.blink_count for p in tr.periods] == [2, 1]
        assert [p.yawn_count for p in tr.periods] == [1, 0]
        assert tr.total_blinks == 3 and tr.total_yawns == 1

    def test_pose_proportions_time_weighted(self):
        tr = SessionTracker(period_seconds=100.0)
        drive(tr, [(60.0, True, PoseClass.CORRECT), (40.0, True, PoseClass.TOO_CLOSE)], fps=2.0)
        tr.finish()
        p = tr.periods[0]
        assert p.pose_proportion["C2"] == pytest.approx(0.6, abs=0.02)
        assert p.pose_proportion["C3"] == pytest.approx(0.4, abs=0.02)
        assert sum(p.pose_proportion.values()) == pytest.approx(1.0, abs=1e-9)

    def test_boundary_event_belongs_to_next_period(self):
        tr = SessionTracker(period_seconds=600.0)
        drive(tr, [(1200.0, True, PoseClass.CORRECT)], fps=1.0)
        tr.add_blink(600.0)  # exactly on the boundary
        tr.finish()
        assert [p.blink_count for p in tr.periods] == [0, 1]

    def test_blink_totals_conserved_across_boundaries(self):
        tr = SessionTracker(period_seconds=60.0)
        times = [1.0, 59.9, 60.0, 119.0, 125.0, 179.0]
        t = 0.0
        for k in range(360):
            tr.add_frame(t, True, PoseClass.CORRECT)
            while times and times[0] <= t:
                tr.add_blink(times.pop(0))
            t += 0.5
        tr.finish()
        assert sum(p.blink_count for p in tr.periods) == 6


class TestPredictStatus:
    def make_stats(self, present=1.0, yawns=0, pose=None):
        return PeriodStats(
            start=0, end=600, yawn_count=yawns,
            pose_proportion=pose or {"C2": 1.0}, present_fraction=present,
        )

    def test_absent_below_presence_floor(self):
        assert predict_status(self.make_stats(present=0.0), []) == ABSENT
        assert predict_status(self.make_stats(present=0.19), []) == ABSENT

    def test_yawn_count_flags_fatigue(self):
        assert predict_status(self.make_stats(yawns=5), []) == POTENTIAL_FATIGUE
        assert predict_status(self.make_stats(yawns=3), []) == POTENTIAL_FATIGUE
        assert predict_status(self.make_stats(yawns=2), []) == NORMAL

    def test_yawn_rate_jump_flags_fatigue(self):
        history = [self.make_stats(yawns=1), self.make_stats(yawns=1), self.make_stats(yawns=1)]
        assert predict_status(self.make_stats(yawns=2), history) == POTENTIAL_FATIGUE
        # no baseline -> quiet periods stay normal
        assert predict_status(self.make_stats(yawns=0), []) == NORMAL

    def test_bad_pose_majority(self):
        stats = self.make_stats(pose={"C2": 0.2, "C3": 0.8})
        assert predict_status(stats, []) == BAD_POSE

    def test_priority_absent_over_fatigue_over_pose(self):
        stats = PeriodStats(
            start=0, end=600, yawn_count=9,
            pose_proportion={"C3": 1.0}, present_fraction=0.1,
        )
        assert predict_status(stats, []) == ABSENT
        stats.present_fraction = 0.9
        assert predict_status(stats, []) == POTENTIAL_FATIGUE
        stats.yawn_count = 0
        assert predict_status(stats, []) == BAD_POSE


class TestAlarms:
    def test_continuous_bad_pose_alarm(self):
        tr = SessionTracker()
        drive(tr, [(11 * 60.0, True, PoseClass.ASKEW_LEFT)], fps=1.0)
        kinds = [a.kind for a in tr.alarms]
        assert "bad-pose" in kinds

    def test_29_minutes_work_is_silent(self):
        tr = SessionTracker()
        drive(tr, [(29 * 60.0, True, PoseClass.CORRECT)], fps=1.0)
        assert [a.kind for a in tr.alarms] == []

    def test_31_minutes_work_alarms_once(self):
        tr = SessionTracker()
        drive(tr, [(35 * 60.0, True, PoseClass.CORRECT)], fps=1.0)
        assert [a.kind for a in tr.alarms] == ["continuous-work"]

    def test_absence_resets_work_timer(self):
        tr = SessionTracker(absence_reset_seconds=60.0)
        drive(tr, [(20 * 60.0, True, PoseClass.CORRECT),
                   (3 * 60.0, False, None),
                   (20 * 60.0, True, PoseClass.CORRECT)], fps=1.0)
        assert [a.kind for a in tr.alarms] == []
        assert tr.work_seconds < 21 * 60

    def test_momentary_neutral_pose_resets_pose_timer(self):
        tr = SessionTracker()
        drive(tr, [(8 * 60.0, True, PoseClass.ASKEW_RIGHT),
                   (10.0, True, PoseClass.CORRECT),
                   (8 * 60.0, True, PoseClass.ASKEW_RIGHT)], fps=1.0)
        assert [a.kind for a in tr.alarms] == []


class TestFeatureSnapshot:
    def test_snapshot_fields(self):
        tr = SessionTracker()
        drive(tr, [(599.0, True, PoseClass.TOO_CLOSE)], fps=1.0)
        tr.add_yawn(30.0)  # open period: still counted in the live snapshot
        tr.add_blink(595.0)
        snap = tr.feature_snapshot(599.0)
        assert snap[WORK_MINUTES] == pytest.approx(10.0, abs=0.1)
        assert snap[BAD_POSE_MINUTES] == pytest.approx(10.0, abs=0.1)
        assert snap[YAWNS_PER_PERIOD] == 1.0
        assert snap["bad_pose_frac"] == 1.0
        assert snap["blink_rate"] == 1


class TestRenderReport:
    def fill(self, tracker, periods=3):
        drive(tracker, [(10.0, True, PoseClass.CORRECT)], fps=1.0)
        tracker.add_blink(5.0)
        t0 = 10.0
        dt = 1.0
        remaining = int(periods * tracker.period_seconds - 10.0)
        for k in range(remaining):
            tracker.add_frame(t0 + k * dt, True, PoseClass.CORRECT)
        tracker.finish()

    def test_report_files(self, tmp_path):
        tr = SessionTracker(period_seconds=60.0)
        self.fill(tr)
        paths = render_report(tr, tmp_path / "out")
        rep = json.loads((tmp_path / "out" / "report.json").read_text())
        assert len(rep["periods"]) == 3
        assert rep["totals"] == {"blinks": 1, "yawns": 0}
        with open(paths["csv"]) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["start", "blink", "yawn", "c1", "c2", "c3", "c4", "c5", "status"]
        assert len(rows) == 4
        assert rows[1][1] == "1"

    def test_single_period_session(self, tmp_path):
        tr = SessionTracker(period_seconds=60.0)
        drive(tr, [(59.0, True, PoseClass.CORRECT)], fps=1.0)
        tr.finish()
        render_report(tr, tmp_path / "o")
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert len(rep["periods"]) == 1

    def test_no_periods_raises(self, tmp_path):
        with pytest.raises(ValueError):
            render_report(SessionTracker(), tmp_path / "x")
