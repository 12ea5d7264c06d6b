"""File formats: manifests, detections, frames, landmarks, distractor logs."""

import numpy as np
import pytest

from mespot import io as mespot_io
from mespot.errors import ParseError, ValidationError
from mespot.model import (
    DatasetManifest,
    Detection,
    GroundTruthSample,
    LandmarkTrack,
    VideoRecord,
)


def _manifest() -> DatasetManifest:
    return DatasetManifest(
        videos=(
            VideoRecord("v0", "s0", 200, 100.0, "frames/v0.mesq"),
            VideoRecord("v1", "s1", 300, 99.5, "frames/v1"),
        ),
        ground_truth=(
            GroundTruthSample("v0", "s0", 10, 40),
            GroundTruthSample("v1", "s1", 150, 170),
        ),
    )


class TestManifestFormat:
    def test_round_trip_is_byte_stable(self, tmp_path):
        path = tmp_path / "manifest.txt"
        mespot_io.write_manifest(_manifest(), path)
        first = path.read_bytes()
        parsed = mespot_io.parse_manifest(path)
        assert parsed == _manifest()
        mespot_io.write_manifest(parsed, path)
        assert path.read_bytes() == first

    def test_base_dir_recorded(self, tmp_path):
        path = tmp_path / "manifest.txt"
        mespot_io.write_manifest(_manifest(), path)
        assert mespot_io.parse_manifest(path).base_dir == str(tmp_path)

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("# header comment\n\n[videos]\nv0,s0,10,100.0,frames/v0\n"
                        "\n# mid comment\n[ground_truth]\nv0,2,5\n")
        m = mespot_io.parse_manifest(path)
        assert m.stats.videos == 1
        assert m.ground_truth[0].interval == (2, 5)

    def test_parse_errors_carry_line_numbers(self, tmp_path):
        bad_field_count = tmp_path / "a.txt"
        bad_field_count.write_text("[videos]\nv0,s0,10,100.0\n")
        with pytest.raises(ParseError, match=r"a\.txt: line 2"):
            mespot_io.parse_manifest(bad_field_count)

        data_before_section = tmp_path / "b.txt"
        data_before_section.write_text("v0,s0,10,100.0,p\n")
        with pytest.raises(ParseError, match="line 1"):
            mespot_io.parse_manifest(data_before_section)

        unknown_section = tmp_path / "c.txt"
        unknown_section.write_text("[videos]\nv0,s0,10,100.0,p\n[bogus]\n")
        with pytest.raises(ParseError, match=r"line 3.*bogus"):
            mespot_io.parse_manifest(unknown_section)

        bad_number = tmp_path / "d.txt"
        bad_number.write_text("[videos]\nv0,s0,ten,100.0,p\n")
        with pytest.raises(ParseError, match="line 2"):
            mespot_io.parse_manifest(bad_number)

    def test_gt_for_unknown_video(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("[videos]\nv0,s0,10,100.0,p\n[ground_truth]\nvX,2,5\n")
        with pytest.raises(ValidationError, match="line 4"):
            mespot_io.parse_manifest(path)

    def test_fps_survives_round_trip_exactly(self, tmp_path):
        m = DatasetManifest(
            videos=(VideoRecord("v", "s", 5, 100.03, "p"),), ground_truth=())
        path = tmp_path / "m.txt"
        mespot_io.write_manifest(m, path)
        assert mespot_io.parse_manifest(path).videos[0].fps == 100.03


class TestDetectionsFormat:
    def test_round_trip_is_byte_stable(self, tmp_path):
        dets = [Detection("v0", 117, 35, 0.123456789012345),
                Detection("v1", 40, 18, 7.0)]
        path = tmp_path / "dets.csv"
        mespot_io.write_detections(dets, path)
        first = path.read_bytes()
        parsed = mespot_io.parse_detections(path)
        assert parsed == dets
        mespot_io.write_detections(parsed, path)
        assert path.read_bytes() == first

    def test_empty_file_and_header_only(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert mespot_io.parse_detections(empty) == []

        header_only = tmp_path / "h.csv"
        header_only.write_text("video_id,center,length,score\n")
        assert mespot_io.parse_detections(header_only) == []

    def test_header_required_before_data(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("v0,10,5,1.0\n")
        with pytest.raises(ParseError, match="header"):
            mespot_io.parse_detections(path)

    def test_manifest_validation(self, tmp_path):
        m = _manifest()
        path = tmp_path / "d.csv"
        mespot_io.write_detections([Detection("vX", 10, 5, 1.0)], path)
        with pytest.raises(ValidationError, match="unknown video_id"):
            mespot_io.parse_detections(path, m)

        mespot_io.write_detections([Detection("v0", 500, 5, 1.0)], path)
        with pytest.raises(ValidationError, match="outside video"):
            mespot_io.parse_detections(path, m)

        mespot_io.write_detections([Detection("v0", 199, 5, 1.0)], path)
        assert len(mespot_io.parse_detections(path, m)) == 1

    def test_invalid_rows_are_parse_errors(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("video_id,center,length,score\nv0,10,0,1.0\n")
        with pytest.raises(ParseError, match="line 2"):
            mespot_io.parse_detections(path)

    def test_group_by_video_preserves_order(self):
        dets = [Detection("b", 1, 2, 0.5), Detection("a", 2, 2, 0.5),
                Detection("b", 3, 2, 0.9)]
        grouped = mespot_io.group_by_video(dets)
        assert list(grouped["b"]) == [dets[0], dets[2]]
        assert list(grouped["a"]) == [dets[1]]


class TestFrameStorage:
    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, size=(17, 23)).astype(np.uint8)
        path = tmp_path / "f.pgm"
        mespot_io.write_pgm(path, image)
        assert np.array_equal(mespot_io.read_pgm(path), image)

    def test_pgm_rejects_other_formats(self, tmp_path):
        path = tmp_path / "f.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
        with pytest.raises(ParseError):
            mespot_io.read_pgm(path)

    def test_raw_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        frames = rng.integers(0, 256, size=(5, 9, 11)).astype(np.uint8)
        path = tmp_path / "v.mesq"
        mespot_io.write_frames_raw(frames, path)
        assert np.array_equal(mespot_io.read_frames_raw(path), frames)

    def test_raw_header_and_truncation_errors(self, tmp_path):
        path = tmp_path / "v.mesq"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(ParseError, match="MESQ"):
            mespot_io.read_frames_raw(path)

        frames = np.zeros((2, 4, 4), dtype=np.uint8)
        mespot_io.write_frames_raw(frames, path)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(ParseError, match="truncated"):
            mespot_io.read_frames_raw(path)

    def test_load_frames_from_directory(self, tmp_path):
        rng = np.random.default_rng(2)
        frames = rng.integers(0, 256, size=(3, 8, 8)).astype(np.uint8)
        directory = tmp_path / "v0"
        mespot_io.write_frames_dir(frames, directory)
        record = VideoRecord("v0", "s0", 3, 100.0, "v0")
        seq = mespot_io.load_frames(record, str(tmp_path))
        assert np.array_equal(seq.frames, frames)

    def test_load_frames_from_raw_file(self, tmp_path):
        frames = np.arange(2 * 4 * 4, dtype=np.uint8).reshape(2, 4, 4)
        mespot_io.write_frames_raw(frames, tmp_path / "v0.mesq")
        record = VideoRecord("v0", "s0", 2, 100.0, "v0.mesq")
        seq = mespot_io.load_frames(record, str(tmp_path))
        assert np.array_equal(seq.frames, frames)

    def test_load_frames_errors(self, tmp_path):
        record = VideoRecord("v9", "s0", 2, 100.0, "v9.mesq")
        with pytest.raises(FileNotFoundError, match="v9"):
            mespot_io.load_frames(record, str(tmp_path))

        frames = np.zeros((3, 4, 4), dtype=np.uint8)
        mespot_io.write_frames_raw(frames, tmp_path / "v9.mesq")
        with pytest.raises(ValidationError, match="declares 2"):
            mespot_io.load_frames(record, str(tmp_path))


class TestLandmarksFormat:
    def test_dense_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        track = LandmarkTrack(video_id="v0", points=rng.uniform(0, 64, (4, 68, 2)))
        path = tmp_path / "lm.csv"
        mespot_io.write_landmarks([track], path)
        parsed = mespot_io.parse_landmarks(path)
        assert set(parsed) == {"v0"}
        assert parsed["v0"].frame_indices is None
        assert np.array_equal(parsed["v0"].points, track.points)

    def test_sparse_round_trip(self, tmp_path):
        track = LandmarkTrack(video_id="v0", points=np.zeros((3, 3, 2)),
                              frame_indices=np.array([0, 10, 20]))
        path = tmp_path / "lm.csv"
        mespot_io.write_landmarks([track], path)
        parsed = mespot_io.parse_landmarks(path)["v0"]
        assert np.array_equal(parsed.frame_indices, [0, 10, 20])

    def test_byte_stable(self, tmp_path):
        rng = np.random.default_rng(4)
        track = LandmarkTrack(video_id="v0", points=rng.uniform(0, 64, (2, 5, 2)))
        path = tmp_path / "lm.csv"
        mespot_io.write_landmarks([track], path)
        first = path.read_bytes()
        mespot_io.write_landmarks(list(mespot_io.parse_landmarks(path).values()), path)
        assert path.read_bytes() == first

    def test_incomplete_point_set_rejected(self, tmp_path):
        path = tmp_path / "lm.csv"
        path.write_text("video_id,frame,point_index,x,y\n"
                        "v0,0,0,1.0,2.0\nv0,0,1,3.0,4.0\nv0,1,0,1.0,2.0\n")
        with pytest.raises(ValidationError, match="point indices"):
            mespot_io.parse_landmarks(path)


class TestDistractorsFormat:
    def test_round_trip(self, tmp_path):
        events = [("v0", "blink", 100, 110), ("v1", "macro_expression", 50, 140)]
        path = tmp_path / "d.csv"
        mespot_io.write_distractors(events, path)
        assert mespot_io.parse_distractors(path) == events

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("nope\n")
        with pytest.raises(ParseError, match="header"):
            mespot_io.parse_distractors(path)


class TestAtomicWrites:
    def test_no_temp_files_left_behind(self, tmp_path):
        path = tmp_path / "out.txt"
        mespot_io.atomic_write_text(path, "hello\n")
        assert path.read_text() == "hello\n"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]

    def test_overwrites_existing(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old")
        mespot_io.atomic_write_text(path, "new")
        assert path.read_text() == "new"
