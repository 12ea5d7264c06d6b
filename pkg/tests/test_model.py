"""Domain types and interval arithmetic."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mespot.errors import ValidationError
from mespot.model import (
    DEFAULT_TEMPLATE,
    AlignmentTemplate,
    DatasetManifest,
    DatasetStats,
    Detection,
    FrameSequence,
    GroundTruthSample,
    LandmarkTrack,
    VideoRecord,
    center_length_to_interval,
    interval_to_center_length,
)

from conftest import gt


class TestIntervalConversion:
    def test_worked_examples(self):
        assert interval_to_center_length(10, 20) == (15, 11)
        assert interval_to_center_length(0, 0) == (0, 1)
        assert interval_to_center_length(5, 6) == (5, 2)  # even length floors
        assert center_length_to_interval(15, 11) == (10, 20)
        assert center_length_to_interval(5, 2) == (5, 6)
        assert center_length_to_interval(0, 1) == (0, 0)

    @given(onset=st.integers(0, 10_000), length=st.integers(1, 500))
    def test_round_trip_from_interval(self, onset, length):
        offset = onset + length - 1
        center, out_length = interval_to_center_length(onset, offset)
        assert out_length == length
        assert center_length_to_interval(center, out_length) == (onset, offset)

    @given(center=st.integers(0, 10_000), length=st.integers(1, 500))
    def test_round_trip_from_center(self, center, length):
        onset, offset = center_length_to_interval(center, length)
        assert offset - onset + 1 == length
        if onset >= 0:
            assert interval_to_center_length(onset, offset) == (center, length)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            interval_to_center_length(5, 4)
        with pytest.raises(ValueError):
            interval_to_center_length(-1, 4)
        with pytest.raises(ValueError):
            center_length_to_interval(10, 0)


class TestGroundTruthSample:
    def test_derived_fields(self):
        sample = gt(100, 134)
        assert sample.center == 117
        assert sample.length == 35
        assert sample.interval == (100, 134)

    def test_even_length_center_floors(self):
        assert gt(10, 13).center == 11

    def test_validation(self):
        with pytest.raises(ValidationError):
            gt(-1, 5)
        with pytest.raises(ValidationError):
            gt(6, 5)


class TestDetection:
    def test_interval_is_canonical(self):
        d = Detection(video_id="v", center=117, length=35, score=0.5)
        assert d.interval == (100, 134)

    def test_validation(self):
        with pytest.raises(ValidationError):
            Detection(video_id="v", center=5, length=0, score=1.0)
        with pytest.raises(ValidationError):
            Detection(video_id="v", center=5, length=3, score=float("nan"))


class TestFrameSequence:
    def test_basic(self):
        frames = np.zeros((4, 8, 9), dtype=np.uint8)
        seq = FrameSequence(video_id="v", fps=100.0, frames=frames)
        assert len(seq) == 4
        assert (seq.height, seq.width) == (8, 9)
        with pytest.raises(ValueError):
            seq.frames[0, 0, 0] = 1  # frozen storage

    def test_validation(self):
        with pytest.raises(ValidationError):
            FrameSequence("v", 100.0, np.zeros((4, 8), dtype=np.uint8))
        with pytest.raises(ValidationError):
            FrameSequence("v", 100.0, np.zeros((4, 8, 8), dtype=np.float64))
        with pytest.raises(ValidationError):
            FrameSequence("v", 0.0, np.zeros((4, 8, 8), dtype=np.uint8))


class TestVideoRecord:
    def test_validation(self):
        with pytest.raises(ValidationError):
            VideoRecord("", "s", 10, 100.0, "p")
        with pytest.raises(ValidationError):
            VideoRecord("v,1", "s", 10, 100.0, "p")
        with pytest.raises(ValidationError):
            VideoRecord("v", "s", 0, 100.0, "p")
        with pytest.raises(ValidationError):
            VideoRecord("v", "s", 10, 100.0, "")


def _manifest() -> DatasetManifest:
    return DatasetManifest(
        videos=(
            VideoRecord("v0", "s0", 200, 100.0, "frames/v0"),
            VideoRecord("v1", "s1", 300, 100.0, "frames/v1"),
            VideoRecord("v2", "s0", 250, 100.0, "frames/v2"),
        ),
        ground_truth=(
            GroundTruthSample("v0", "s0", 10, 40),
            GroundTruthSample("v1", "s1", 50, 80),
            GroundTruthSample("v1", "s1", 150, 170),
        ),
    )


class TestDatasetManifest:
    def test_stats_recomputed(self):
        m = _manifest()
        assert m.stats == DatasetStats(videos=3, subjects=2, samples=3)
        assert m.subjects == ["s0", "s1"]

    def test_lookup_helpers(self):
        m = _manifest()
        assert m.video("v1").frame_count == 300
        assert [s.interval for s in m.samples_for("v1")] == [(50, 80), (150, 170)]
        assert m.samples_for("v2") == []
        with pytest.raises(KeyError):
            m.video("missing")

    def test_duplicate_video_rejected(self):
        with pytest.raises(ValidationError):
            DatasetManifest(
                videos=(VideoRecord("v0", "s0", 10, 100.0, "a"),
                        VideoRecord("v0", "s0", 10, 100.0, "b")),
                ground_truth=())

    def test_gt_must_reference_known_video(self):
        with pytest.raises(ValidationError):
            DatasetManifest(
                videos=(VideoRecord("v0", "s0", 10, 100.0, "a"),),
                ground_truth=(GroundTruthSample("vX", "s0", 1, 2),))

    def test_gt_subject_must_match_video(self):
        with pytest.raises(ValidationError):
            DatasetManifest(
                videos=(VideoRecord("v0", "s0", 10, 100.0, "a"),),
                ground_truth=(GroundTruthSample("v0", "s1", 1, 2),))

    def test_gt_must_fit_frame_range(self):
        with pytest.raises(ValidationError):
            DatasetManifest(
                videos=(VideoRecord("v0", "s0", 10, 100.0, "a"),),
                ground_truth=(GroundTruthSample("v0", "s0", 5, 10),))

    def test_base_dir_excluded_from_equality(self):
        a = _manifest()
        b = DatasetManifest(videos=a.videos, ground_truth=a.ground_truth,
                            base_dir="/elsewhere")
        assert a == b


class TestLandmarkTrack:
    def test_dense_track(self):
        pts = np.zeros((5, 68, 2))
        track = LandmarkTrack(video_id="v", points=pts)
        assert len(track) == 5
        assert track.n_points == 68
        assert track.covers_video(5)
        assert not track.covers_video(6)

    def test_sparse_track(self):
        pts = np.zeros((3, 68, 2))
        track = LandmarkTrack(video_id="v", points=pts,
                              frame_indices=np.array([0, 10, 20]))
        assert not track.covers_video(3)

    def test_validation(self):
        with pytest.raises(ValidationError):
            LandmarkTrack(video_id="v", points=np.zeros((5, 68, 3)))
        with pytest.raises(ValidationError):
            LandmarkTrack(video_id="v", points=np.zeros((3, 68, 2)),
                          frame_indices=np.array([0, 0, 1]))
        with pytest.raises(ValidationError):
            LandmarkTrack(video_id="v", points=np.zeros((3, 68, 2)),
                          frame_indices=np.array([0, 1]))


class TestAlignmentTemplate:
    def test_default_template(self):
        assert DEFAULT_TEMPLATE.points.shape == (3, 2)
        assert (DEFAULT_TEMPLATE.width, DEFAULT_TEMPLATE.height) == (128, 128)

    def test_validation(self):
        with pytest.raises(ValidationError):
            AlignmentTemplate(points=np.zeros((4, 2)))
        with pytest.raises(ValidationError):
            AlignmentTemplate(points=np.zeros((3, 2)), width=0)
