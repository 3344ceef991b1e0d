import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergowatch.pose import Pose, PoseClass, project
from ergowatch.stream import (
    CLOSED_EYE_LEVEL,
    MOUTH_IDS,
    N_LANDMARKS,
    OPEN_EYE_LEVEL,
    RIGID_IDS,
    EyePair,
    EyePatch,
    GroundTruth,
    LandmarkFrame,
    ParseError,
    PoseSegment,
    SchemaError,
    StreamScript,
    parse_frame,
    read_stream,
    serialize_frame,
    simulate,
    write_stream,
)


def minimal_record(n_points=N_LANDMARKS):
    return {
        "t": 0.25,
        "fps": 30.0,
        "d": 600.0,
        "points": [[float(i), float(2 * i)] for i in range(n_points)],
    }


class TestParseFrame:
    def test_direct_mapping(self):
        rec = minimal_record()
        rec["responses"] = [0.5] * N_LANDMARKS
        frame = parse_frame(json.dumps(rec))
        assert frame.t == 0.25 and frame.fps == 30.0
        assert frame.points.shape == (76, 2)
        assert frame.points[3, 1] == 6.0
        assert np.all(frame.responses == 0.5)

    def test_wrong_point_count(self):
        with pytest.raises(SchemaError):
            parse_frame(json.dumps(minimal_record(75)))

    def test_defaults(self):
        frame = parse_frame(json.dumps(minimal_record()))
        assert np.all(frame.responses == 1.0)
        assert frame.tracked is True
        assert frame.eyes is None

    def test_malformed_record_carries_line_number(self):
        with pytest.raises(ParseError, match="line 17"):
            parse_frame("{not json", lineno=17)

    def test_missing_field(self):
        rec = minimal_record()
        del rec["d"]
        with pytest.raises(SchemaError, match="'d'"):
            parse_frame(json.dumps(rec))

    def test_bad_scalar_values(self):
        rec = minimal_record()
        rec["fps"] = 0.0
        with pytest.raises(SchemaError):
            parse_frame(json.dumps(rec))


finite = st.floats(allow_nan=False, allow_infinity=False, width=32)


@st.composite
def frames(draw):
    pts = draw(
        st.lists(st.tuples(finite, finite), min_size=N_LANDMARKS, max_size=N_LANDMARKS)
    )
    with_eyes = draw(st.booleans())
    eyes = None
    if with_eyes:
        px = np.full((3, 4, 3), draw(st.integers(0, 255)), dtype=float)
        eyes = EyePair(left=EyePatch((1.0, 2.0), px), right=EyePatch((5.0, 6.0), px))
    return LandmarkFrame(
        t=draw(st.floats(0, 1e6, allow_nan=False)),
        fps=draw(st.floats(0.1, 240, allow_nan=False)),
        points=np.array(pts, dtype=float),
        d=draw(st.floats(1e-3, 1e5, allow_nan=False)),
        responses=np.array(draw(st.lists(st.floats(0, 1, allow_nan=False, width=32), min_size=76, max_size=76))),
        tracked=draw(st.booleans()),
        eyes=eyes,
    )


class TestRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(frames())
    def test_serialize_parse_identity(self, frame):
        assert parse_frame(serialize_frame(frame)) == frame

    def test_stream_file_round_trip(self, tmp_path):
        fs = [
            LandmarkFrame(t=i / 10, fps=10.0, points=np.zeros((76, 2)) + i, d=500.0)
            for i in range(5)
        ]
        path = tmp_path / "s.jsonl"
        assert write_stream(fs, path) == 5
        back = list(read_stream(path))
        assert back == fs

    def test_nonmonotone_stream_rejected(self, tmp_path):
        f = LandmarkFrame(t=1.0, fps=10.0, points=np.zeros((76, 2)), d=500.0)
        path = tmp_path / "bad.jsonl"
        path.write_text(serialize_frame(f) + "\n" + serialize_frame(f) + "\n")
        with pytest.raises(SchemaError, match="line 2"):
            list(read_stream(path))


class TestScriptValidation:
    def test_overlapping_spans(self):
        s = StreamScript(duration=10, fps=10, yawns=[(1, 3), (2, 4)])
        with pytest.raises(Exception, match="overlap"):
            s.validate()

    def test_span_outside_duration(self):
        s = StreamScript(duration=10, fps=10, absences=[(5, 12)])
        with pytest.raises(Exception, match="outside"):
            s.validate()

    def test_script_file_round_trip(self, tmp_path):
        s = StreamScript(
            duration=20,
            fps=5,
            pose_segments=[PoseSegment(0, 20, PoseClass.CORRECT, translation=(0, 0, 550))],
            blinks=[2.0, 9.5],
            yawns=[(4, 6)],
            sigma=0.5,
        )
        p = tmp_path / "script.json"
        s.save(p)
        back = StreamScript.load(p)
        assert back.duration == 20 and back.blinks == [2.0, 9.5]
        assert back.pose_segments[0].label is PoseClass.CORRECT
        assert back.pose_segments[0].translation == (0, 0, 550)


class TestSimulate:
    def test_frame_count_and_constant_pose(self, template, intrinsics):
        script = StreamScript(duration=10.0, fps=30.0, sigma=0.3)
        frames, truth = simulate(script, template, intrinsics, seed=0)
        assert len(frames) == 300  # floor(duration * fps)
        assert truth.blinks == [] and truth.yawns == []
        assert all(f.tracked for f in frames)

    def test_zero_noise_matches_projection_exactly(self, template, intrinsics):
        tz = 640.0
        script = StreamScript(
            duration=1.0,
            fps=10.0,
            pose_segments=[PoseSegment(0.0, 1.0, PoseClass.CORRECT, translation=(5.0, -3.0, tz))],
            sigma=0.0,
        )
        frames, _ = simulate(script, template, intrinsics, seed=0)
        expected = project(template.points, Pose(np.zeros(3), np.array([5.0, -3.0, tz])), intrinsics)
        for f in frames:
            assert np.array_equal(f.points[list(RIGID_IDS)], expected)

    def test_blink_lands_near_scripted_frame(self, template, intrinsics):
        script = StreamScript(duration=10.0, fps=30.0, blinks=[2.0])
        frames, truth = simulate(script, template, intrinsics, seed=1)
        assert truth.blinks == [60]
        # patch brightness jumps at the annotated frame (closed = skin tone)
        def level(f):
            return f.eyes.left.pixels.mean()

        assert level(frames[59]) < (OPEN_EYE_LEVEL + CLOSED_EYE_LEVEL) / 2
        assert level(frames[60]) > (OPEN_EYE_LEVEL + CLOSED_EYE_LEVEL) / 2
        closed_run = sum(1 for f in frames[60:70] if level(f) > 120)
        assert 3 <= closed_run <= 5

    def test_absence_span_marks_untracked(self, template, intrinsics):
        script = StreamScript(duration=10.0, fps=10.0, absences=[(5.0, 6.0)])
        frames, truth = simulate(script, template, intrinsics, seed=0)
        assert truth.absences == [(50, 60)]
        assert all(not frames[i].tracked for i in range(50, 60))
        assert all(frames[i].tracked for i in list(range(0, 50)) + list(range(60, 100)))
        assert frames[50].eyes is None

    def test_tracking_loss_keeps_tracked_flag(self, template, intrinsics):
        script = StreamScript(duration=6.0, fps=10.0, tracking_losses=[(2.0, 3.0)])
        frames, truth = simulate(script, template, intrinsics, seed=0)
        assert truth.absences == [(20, 30)]
        assert all(frames[i].tracked for i in range(20, 30))  # tracker is deluded
        assert all(frames[i].responses.max() < 0.2 for i in range(20, 30))

    def test_yawn_opens_mouth(self, template, intrinsics):
        script = StreamScript(duration=6.0, fps=10.0, yawns=[(2.0, 4.0)])
        frames, truth = simulate(script, template, intrinsics, seed=0)
        assert truth.yawns == [(20, 40)]

        def mouth_spread(f):
            ys = f.points[list(MOUTH_IDS), 1]
            return ys.max() - ys.min()

        closed = mouth_spread(frames[10])
        open_ = mouth_spread(frames[25])
        assert open_ > closed * 1.5

    def test_deterministic_for_seed(self, template, intrinsics):
        script = StreamScript(duration=2.0, fps=10.0, blinks=[1.0], sigma=0.7)
        f1, _ = simulate(script, template, intrinsics, seed=9)
        f2, _ = simulate(script, template, intrinsics, seed=9)
        assert f1 == f2

    def test_ground_truth_file_round_trip(self, tmp_path):
        gt = GroundTruth(blinks=[3, 9], yawns=[(5, 12)], poses=[(0, 20, "C2")], absences=[(13, 15)])
        p = tmp_path / "gt.json"
        gt.save(p)
        assert GroundTruth.load(p) == gt
